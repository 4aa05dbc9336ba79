"""Deterministic mixture weights versus classical importance weights.

A particle drawn early from a poor proposal can carry a huge weight
pi/q_0.  Once better proposals join the archive, its mixture weight is
computed against all of them and shrinks.
"""
import numpy as np

from amis import Gaussian, ParticleArchive, ProposalRecord, StudentTParams

rng = np.random.default_rng(0)
target = Gaussian(np.zeros(1))
poor = StudentTParams([6.0], [[0.25]])
good = StudentTParams([0.0], [[1.0]])

y0 = np.array([[0.5], [6.0]])
archive = ParticleArchive(1).add_batch(y0, target.log_density(y0), ProposalRecord(poor, 2, 0))
print("log weight of y=0.5 drawn from the poor proposal")
print(f"  t=0  classical {archive.log_weights('standard')[0]:8.3f}")

for t in range(1, 6):
    y = good.sample(2, rng)
    archive.add_batch(y, target.log_density(y), ProposalRecord(good, 2, t))
    print(f"  t={t}  classical {archive.log_weights('standard')[0]:8.3f}"
          f"   mixture {archive.log_weights('mixture')[0]:8.3f}")

print(f"\nESS with mixture weights  : {archive.ess():.2f} of {len(archive)}")
snap = archive.normalized_weights("standard")
print(f"ESS with classical weights: {snap.normalized.sum() ** 2 / np.sum(snap.normalized ** 2):.2f}")
