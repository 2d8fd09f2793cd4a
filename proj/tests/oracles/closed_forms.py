# Copyright 2026 The dlslab Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""High-precision evaluation of the chunk-size closed forms.

Used once to freeze expected values into tests/unit/*.cpp. Independent of the
C++ implementation (mpmath at 50 digits, integer arithmetic where possible).
"""
from fractions import Fraction
from mpmath import mp, mpf, sqrt, log, ceil

mp.dps = 50


def fsc(n, p, h, sigma):
    ratio = (sqrt(2) * n * h) / (sigma * p * sqrt(log(p, 2)))
    return int(ceil(ratio ** (mpf(2) / 3))), ratio


def fac_batch(R, p, cov):
    b = (mpf(p) / (2 * sqrt(R))) * cov
    x = 1 + b * b + b * sqrt(b * b + 2)
    return int(ceil(R / (x * p))), b, x


def tap(R, p, cov, alpha=mpf("1.3")):
    v = alpha * cov
    return int(ceil(mpf(R) / p + v * v / 2 - v * sqrt(2 * mpf(R) / p + v * v / 4)))


def af(R, mus, sigmas, t):
    D = sum(s * s / m for s, m in zip(sigmas, mus))
    E = 1 / sum(1 / m for m in mus)
    return int(ceil((D + 2 * E * R - sqrt(D * D + 4 * D * E * R)) / (2 * mus[t])))


def tss(n, p, k, count):
    f = -(-n // (2 * p))
    l = k
    C = -(-2 * n // (f + l))
    out = []
    for c in range(count):
        val = Fraction(f) - Fraction(c * (f - l), C - 1)
        out.append(max(l, val.__floor__()))
    return f, C, out


def fac2_batches(n, p, batches):
    return [-(-n // (2 ** (j + 1) * p)) for j in range(batches)]


def bold_sequence(n, p, mu, sigma, h, k=1):
    """Serial BOLD chunk sizes: each request sees the true remaining count."""
    out = []
    R = n
    c1 = h / (mu * log(2))
    cov = sigma / mu
    while R > 0:
        share = mpf(R) / p
        bonus = c1 * log(max(mpf(1), share)) / (1 + 2 * cov * cov)
        s = max(int(ceil(share + bonus)), -(-R // p))
        s = min(R, max(s, k))
        out.append(s)
        R -= s
    return out


def wf2_batch0(n, p, weights):
    b = -(-n // (2 * p))
    total = sum(weights)
    return [int(ceil(b * mpf(w) * p / total)) for w in weights]


def awf_weights(rates):
    p = len(rates)
    return [mpf(p) * r / sum(rates) for r in rates]


if __name__ == "__main__":
    print("fsc", fsc(10**6, 20, mpf("2e-6"), mpf("1e-5")))
    print("fac", fac_batch(10**6, 20, mpf("0.5")))
    print("tap", tap(10**6, 20, mpf("0.5")))
    print("af t0", af(10000, [mpf("1e-3"), mpf("2e-3")], [mpf("1e-4")] * 2, 0))
    print("af t1", af(10000, [mpf("1e-3"), mpf("2e-3")], [mpf("1e-4")] * 2, 1))
    print("tss", tss(1000, 4, 1, 18))
    print("fac2", fac2_batches(100, 4, 7))
    mu = mpf(5) / 4
    sd = sqrt(sum((x - mu) ** 2 for x in [1, 1, 1, 2]) / 4)
    print("cov", sd / mu, "pi", (2 - mu) / 2 * mpf(4) / 3 * 100)
    seq = bold_sequence(10**6, 20, mpf(1), mpf("0.5"), mpf(50))
    print("bold len", len(seq), "head", seq[:12], "sum", sum(seq))
    print("wf2", wf2_batch0(1000, 2, [1.5, 0.5]))
    print("awf", awf_weights([2, 1]))
