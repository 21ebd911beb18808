"""Multi-agent medication-plan revision benchmark for multimorbidity cases.

A general-practitioner agent, optionally joined by a dynamically convened
multidisciplinary team, revises a patient's medication plan; the result is
scored against a clinician-curated gold standard with exact rational
arithmetic.
"""

__version__ = "0.1.0"
