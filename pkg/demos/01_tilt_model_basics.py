"""Tilt-model basics.

Walks through the exponential tilt kernel: how the tilt weight e^{eta*y}
reshapes an outcome distribution, what the closed-form binary quantities
look like, and why the selection-offset parameterization is the same
model in different clothes.
"""

import numpy as np

from tiltrisk import TiltSpec, binary_b, binary_c, selection_a, tilt_weight, tilted_bernoulli

# ---------------------------------------------------------------------------
# 1. The tilt weight
# ---------------------------------------------------------------------------
# The sensitivity model multiplies the source outcome density by e^{eta*q(y)}
# and renormalizes.  eta = 0 leaves the distribution alone.

print("tilt weight at eta=0:", tilt_weight(1.0, TiltSpec(0.0)))
print("tilt weight e^{ln4 * 1}:", tilt_weight(1.0, TiltSpec(np.log(4))))

# ---------------------------------------------------------------------------
# 2. Tilting a Bernoulli outcome
# ---------------------------------------------------------------------------
# For a binary outcome the normalized tilt has a closed form.  A success
# probability of 0.2 tilted by eta = ln 4 becomes exactly 0.5: the odds get
# multiplied by 4.

for eta in (-1.0, 0.0, np.log(4), 3.0):
    print(f"g=0.2 tilted by eta={eta:+.2f} -> {tilted_bernoulli(0.2, eta):.4f}")

# The tilt acts on the logit scale: tilted logit = logit(g) + eta.
g = 0.35
eta = 0.8
lhs = tilted_bernoulli(g, eta)
rhs = 1 / (1 + np.exp(-(np.log(g / (1 - g)) + eta)))
print(f"logit-shift identity: {lhs:.12f} == {rhs:.12f}")

# ---------------------------------------------------------------------------
# 3. The tilted conditional risk
# ---------------------------------------------------------------------------
# Suppose a model predicts 0.1 for a person whose true success probability
# is 0.2.  The Brier losses at the two possible outcomes are 0.81 and 0.01.
# Under the tilt the expected loss interpolates between them.

l1, l0 = 0.81, 0.01
for eta in (-2.0, 0.0, np.log(4), 5.0):
    print(f"conditional risk at eta={eta:+.2f}: {binary_b(l1, l0, 0.2, eta):.4f}")

# The normalizer c is what makes the tilted density integrate to one.
print("normalizer at eta=ln4, g=0.2:", binary_c(0.2, np.log(4)))  # 1.6

# ---------------------------------------------------------------------------
# 4. Selection-model view
# ---------------------------------------------------------------------------
# The same model says: the log-odds of being in the target population,
# given covariates AND the outcome, is a covariate offset a(x) plus eta*y.
# The offset is determined by the sampling probability and the normalizer.

p_source = 0.2        # Pr[S=1 | X]
c = binary_c(0.2, np.log(4))
a = selection_a(p_source, c)
print(f"selection offset a = logit(0.8) - ln({c}) = {a:.4f}")
print("weight identity:",
      np.exp(a + np.log(4) * 1.0),
      "==", (1 - p_source) / p_source * np.exp(np.log(4)) / c)
