"""How much surrogate excess risk buys a given excess error.

For each margin loss we compute the calibration envelope psi numerically
(as the convex lower hull of psi_tilde) and compare it with the known
closed form.  Then we feed it through the noise-adjusted transform Psi to
show how a Tsybakov exponent changes the surrogate accuracy we must reach.

    python demos/calibration_transform.py
"""

import numpy as np

from surrogate_al import capital_psi, capital_psi_inverse, make_loss, psi

x = np.array([0.05, 0.1, 0.25, 0.5, 1.0])

print("psi(x), numeric vs closed form")
for kind, f_bar in [("quadratic", 1.0), ("hinge", 1.0), ("exponential", 20.0),
                    ("truncated_quadratic", 1.0)]:
    loss = make_loss(kind, f_bar)
    num = psi(loss, x)
    ref = loss.closed_form_psi(x)
    print(f"  {kind:20s}", " ".join(f"{v:.5f}" for v in num),
          f"  max diff {np.max(np.abs(num - ref)):.1e}")

# surrogate accuracy needed for excess error eps, with and without low noise
quad = make_loss("quadratic")
print("\nquadratic loss: surrogate target Psi(eps)")
for eps in (0.1, 0.03, 0.01):
    flat = capital_psi(quad, eps, a=1.0, alpha=0.0)
    tsy = capital_psi(quad, eps, a=1.0, alpha=1.0)
    print(f"  eps={eps:<5} alpha=0: {flat:.2e}   alpha=1: {tsy:.2e}")

# and back: what a surrogate excess gamma guarantees
print("\nPsi^-1(gamma) with alpha=1")
for gamma in (1e-2, 1e-3, 1e-4):
    print(f"  gamma={gamma:.0e} -> eps <= {capital_psi_inverse(quad, gamma, 1.0, 1.0):.4f}")
