"""Every hand-written backward rule, checked against central differences.

Run: python3 demos/gradient_check.py
"""

from wavesfnet import gradsuite

for name, err in gradsuite.run_all().items():
    flag = "ok" if err <= gradsuite.TOLERANCE else "MISMATCH"
    print(f"{name:28s} {err:.2e}  {flag}")
