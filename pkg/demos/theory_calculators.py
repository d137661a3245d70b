"""
Tuning constants and risk bounds
================================

The calculators turn sample size, dimension, confidence level and noise
scales into a suggested penalty and a high-probability risk bound.
"""

from lcsm.theory import TheoryInputs, risk_bound, tau, theory_report

for n in (50, 200, 800, 3200):
    inp = TheoryInputs(n=n, d=20, nu=0.05, u_p=4.47, sigma_Wn=1.0, theta_l1=120.0)
    print(f"n={n:5d}  tau={tau(inp):.4f}  bound={risk_bound(inp):10.3f}")

# the Gaussian bound halves each time n grows fourfold
rep = theory_report(TheoryInputs(n=200, d=20, nu=0.05, u_p=4.47, sigma_eps_n=1.0, b=0.5, theta_l1=120.0, p=210))
for key, value in rep.items():
    print(key, value)
