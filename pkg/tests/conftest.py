"""Shared fixtures: small generated datasets and a fake credit-style raw table."""

import os
from pathlib import Path

import numpy as np
import pytest

from disparity_lab import data as dlab_data

# real Statlog value codes, so the shipped schema learns the true vocab sizes
GERMAN_VOCAB = {
    "checking_status": ["A11", "A12", "A13", "A14"],
    "credit_history": ["A30", "A31", "A32", "A33", "A34"],
    "purpose": ["A40", "A41", "A410", "A42", "A43", "A44",
                "A45", "A46", "A48", "A49"],
    "savings": ["A61", "A62", "A63", "A64", "A65"],
    "employment_since": ["A71", "A72", "A73", "A74", "A75"],
    "personal_status": ["A91", "A92", "A93", "A94"],
    "other_debtors": ["A101", "A102", "A103"],
    "property": ["A121", "A122", "A123", "A124"],
    "other_installment_plans": ["A141", "A142", "A143"],
    "housing": ["A151", "A152", "A153"],
    "job": ["A171", "A172", "A173", "A174"],
    "telephone": ["A191", "A192"],
    "foreign_worker": ["A201", "A202"],
}
GERMAN_NUMERIC = {
    "duration": (4, 72), "credit_amount": (250, 18424),
    "installment_rate": (1, 4), "residence_since": (1, 4),
    "age": (19, 75), "existing_credits": (1, 4), "num_dependents": (1, 2),
}
GERMAN_ORDER = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings", "employment_since", "installment_rate",
    "personal_status", "other_debtors", "residence_since", "property",
    "age", "other_installment_plans", "housing", "existing_credits",
    "job", "num_dependents", "telephone", "foreign_worker", "credit_risk",
]

SCHEMA_PATH = Path(__file__).parent.parent / "schemas" / "german.schema"


def fake_german_text(n, seed):
    """Raw rows in german.data layout; first rows cycle every category so
    one-hot widths match the real vocabularies."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        vals = []
        for name in GERMAN_ORDER:
            if name in GERMAN_VOCAB:
                voc = GERMAN_VOCAB[name]
                pick = voc[i % len(voc)] if i < 10 else voc[rng.integers(len(voc))]
                vals.append(pick)
            elif name == "credit_risk":
                vals.append("x")
            else:
                lo, hi = GERMAN_NUMERIC[name]
                vals.append(str(int(rng.integers(lo, hi + 1))))
        age = int(vals[GERMAN_ORDER.index("age")])
        good = rng.random() < (0.75 if age >= 38 else 0.60)
        vals[-1] = "1" if good else "2"
        rows.append(" ".join(vals))
    return "\n".join(rows) + "\n"


def german_data_path():
    """Real german.data if supplied; None otherwise (tests decide how to react)."""
    env = os.environ.get("DISPARITY_LAB_GERMAN")
    if env and Path(env).exists():
        return Path(env)
    local = Path(__file__).parent / "data" / "german.data"
    return local if local.exists() else None


@pytest.fixture()
def fake_german_file(tmp_path):
    path = tmp_path / "german_fake.data"
    path.write_text(fake_german_text(400, 11))
    return path


@pytest.fixture(scope="session")
def thm42_small():
    return dlab_data.gen_thm42_data(4000, 101)


@pytest.fixture(scope="session")
def thm43_small():
    return dlab_data.gen_thm43_data(4000, 102)
