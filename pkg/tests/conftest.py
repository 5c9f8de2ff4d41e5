"""Shared fixtures: synthetic files in the UCI Adult and Bank layouts.

The real UCI files are not shipped. The generators below write rows with
the same columns, delimiters, missing-value markers and target encodings,
with labels drawn from a known logistic model so learners have signal.
"""
from __future__ import annotations

import numpy as np
import pytest
from scipy.special import expit

WORKCLASS = ["Private", "Self-emp-not-inc", "Local-gov", "State-gov", "?"]
EDUCATION = ["Bachelors", "HS-grad", "Masters", "Some-college", "Doctorate"]
MARITAL = ["Married-civ-spouse", "Never-married", "Divorced"]
OCCUPATION = ["Tech-support", "Craft-repair", "Sales", "Exec-managerial", "?"]
RELATIONSHIP = ["Husband", "Wife", "Own-child", "Not-in-family"]
RACE = ["White", "Black", "Asian-Pac-Islander"]
SEX = ["Male", "Female"]
COUNTRY = ["United-States", "Mexico", "India", "?"]


def write_adult_like(path, n: int, seed: int, test_style: bool = False) -> None:
    rng = np.random.default_rng(seed)
    age = rng.integers(17, 80, n)
    edu_num = rng.integers(1, 17, n)
    hours = rng.integers(10, 70, n)
    married = rng.random(n) < 0.45
    sex = rng.random(n) < 0.6
    # interaction between marriage and education drives the label
    z = -1.6 + 0.05 * (age - 40) + 0.25 * (edu_num - 10) + 0.9 * married + 0.6 * married * (edu_num > 12) \
        + 0.02 * (hours - 40) + 0.2 * sex
    y = rng.random(n) < expit(z)
    pos, neg = (">50K.", "<=50K.") if test_style else (">50K", "<=50K")
    with open(path, "w") as fh:
        if test_style:
            fh.write("|1x3 Cross validator\n")
        for i in range(n):
            row = [
                str(age[i]), rng.choice(WORKCLASS), str(rng.integers(20000, 400000)),
                EDUCATION[min(int(edu_num[i]) // 4, 4)], str(edu_num[i]),
                "Married-civ-spouse" if married[i] else rng.choice(MARITAL[1:]),
                rng.choice(OCCUPATION), rng.choice(RELATIONSHIP), rng.choice(RACE),
                "Male" if sex[i] else "Female", str(rng.choice([0, 0, 0, 5178])), "0", str(hours[i]),
                rng.choice(COUNTRY), pos if y[i] else neg,
            ]
            fh.write(", ".join(row) + "\n")


BANK_HEADER = ["age", "job", "marital", "education", "default", "balance", "housing", "loan", "contact",
               "day", "month", "duration", "campaign", "pdays", "previous", "poutcome", "y"]


def write_bank_like(path, n: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    with open(path, "w") as fh:
        fh.write(";".join(f'"{h}"' for h in BANK_HEADER) + "\n")
        for _ in range(n):
            age = int(rng.integers(18, 90))
            balance = int(rng.normal(1300, 3000))
            housing = rng.random() < 0.55
            contact = rng.choice(["cellular", "telephone", "unknown"])
            duration = int(rng.exponential(250))
            z = -2.0 + 0.8 * (contact == "cellular") - 0.6 * housing + 0.00008 * balance + 0.01 * (age - 40)
            y = rng.random() < expit(z)
            row = [
                str(age), '"' + rng.choice(["admin.", "technician", "services", "unknown"]) + '"',
                '"' + rng.choice(["married", "single", "divorced"]) + '"',
                '"' + rng.choice(["primary", "secondary", "tertiary", "unknown"]) + '"',
                '"no"', str(balance), '"yes"' if housing else '"no"', '"' + rng.choice(["yes", "no"]) + '"',
                f'"{contact}"', str(rng.integers(1, 32)), '"' + rng.choice(["may", "jun", "jul", "aug"]) + '"',
                str(duration), str(rng.integers(1, 10)), str(rng.choice([-1, -1, -1, 90, 180])),
                str(rng.integers(0, 4)), '"' + rng.choice(["unknown", "success", "failure"]) + '"',
                '"yes"' if y else '"no"',
            ]
            fh.write(";".join(row) + "\n")


@pytest.fixture(scope="session")
def adult_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("adult")
    write_adult_like(d / "adult.data", 1600, seed=1)
    write_adult_like(d / "adult.test", 400, seed=2, test_style=True)
    return [d / "adult.data", d / "adult.test"]


@pytest.fixture(scope="session")
def bank_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("bank")
    write_bank_like(d / "bank-full.csv", 1500, seed=3)
    return d / "bank-full.csv"
