"""Frozen regression values.

Lowest chain levels at theta = 1.56, epsilon = 1, from a separate
plain-Kronecker script (full numpy.linalg.eigvalsh, no code shared with the
package). Variational levels come from the dense solve of the effective
operator and were cross-checked against the explicit ell = 6 chain embedding.
"""

GOLDEN_GAPS = {1: 6.660525340892594e-05, 2: 5.580871316499655e-08, 3: 2.0793629125519852e-08}
GOLDEN_NEXT = {1: 1.7719042724030021e-01, 2: 1.3403753178965963e-01, 3: 7.6434985517816152e-05}

# half-levels of the effective operator at theta = 1.56, phi = 0
VARIATIONAL_GAPS = {1: 1.2648461523552396e-11, 2: 5.074971766284877e-12}
