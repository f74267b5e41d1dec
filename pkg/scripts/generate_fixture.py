#!/usr/bin/env python3
"""Regenerate the synthetic survey fixture (deterministic, seed 20230626).

The GESIS survey file is not redistributable, so tests and demos run on a
schema-compatible synthetic table sampled from the hand-built generator
network written alongside it. Raw cells are numeric tokens like the source
data; a small share are replaced by missing-codes, open-ended theme
indicators are only filled for the subpopulation that was "asked", and one
municipality level is deliberately rarer than the <50 threshold.
"""

import csv
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from beliefnet.inference import sample
from beliefnet.model import CategoricalVariable, Cpt, Dag, FittedNetwork
from beliefnet.modelio import save

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")
SEED = 20230626
N_ROWS = 2400

LIKERT = ("Strongly disagree", "Somewhat disagree", "Somewhat agree", "Strongly agree")
INTEREST = ("Not at all", "Less strongly", "Strongly", "Very strongly")
INFORMED = ("Very poor", "Rather poor", "Rather good", "Very good")


def _monotone_rows(q, grad=1.0, base=(0.3, 0.3, 0.25, 0.15)):
    """q rows over 4 levels whose mass drifts upward with the parent level."""
    rows = []
    logits0 = np.log(np.asarray(base))
    direction = np.array([-1.5, -0.5, 0.5, 1.5])
    for j in range(q):
        logits = logits0 + grad * (j - (q - 1) / 2) / max(q - 1, 1) * direction * 2.2
        p = np.exp(logits)
        rows.append(p / p.sum())
    return np.array(rows)


def generator_network() -> FittedNetwork:
    variables = (
        CategoricalVariable("sex", ("Female", "Male")),
        CategoricalVariable("age", ("14-29", "30-44", "45-59", "60+"), ordinal=True),
        CategoricalVariable("edu", ("Low", "Medium", "High"), ordinal=True),
        CategoricalVariable("mun", ("<5k", "5k-19k", "20k-99k", "100k-499k", "500k+")),
        CategoricalVariable("income", ("Low", "Medium", "High", "Not reported")),
        CategoricalVariable(
            "party",
            ("SPD", "Greens", "Linke", "CDU_CSU", "AfD", "FDP", "OtherParty", "NonVoter"),
        ),
        CategoricalVariable("interest", INTEREST, ordinal=True),
        CategoricalVariable("informed", INFORMED, ordinal=True),
        CategoricalVariable("media", ("Yes", "No")),
        CategoricalVariable("search", ("Yes", "No")),
        CategoricalVariable("friends", ("Yes", "No")),
        CategoricalVariable("easier", LIKERT, ordinal=True),
        CategoricalVariable("develop", ("Risk", "Opportunity", "Both")),
        CategoricalVariable("uncontrol", LIKERT, ordinal=True),
        CategoricalVariable(
            "euappr", ("Not strict enough", "Appropriate", "Too strict", "Don't know")
        ),
        CategoricalVariable("heardeu", ("Yes", "No")),
        CategoricalVariable("aireg", ("Yes", "No")),
    )
    parents = {
        "edu": ("age",),
        "income": ("edu",),
        "party": ("edu",),
        "interest": ("sex", "edu"),
        "informed": ("interest",),
        "media": ("age",),
        "search": ("interest",),
        "friends": ("interest",),
        "easier": ("interest",),
        "develop": ("easier",),
        "uncontrol": ("easier",),
        "euappr": ("uncontrol",),
        "heardeu": ("interest", "search"),
        "aireg": ("euappr",),
    }
    dag = Dag(tuple(v.name for v in variables), parents)

    def yes_no(ps):
        return [[p, 1.0 - p] for p in ps]

    interest_rows = []
    for sex in range(2):
        for edu in range(3):
            logits = np.log([0.18, 0.34, 0.30, 0.18])
            logits += (0.55 * edu + 0.3 * (1 - sex)) * np.array([-1.2, -0.4, 0.4, 1.2]) / 2
            p = np.exp(logits)
            interest_rows.append(p / p.sum())

    cpts = {
        "sex": Cpt("sex", (), [[0.51, 0.49]]),
        "age": Cpt("age", (), [[0.20, 0.25, 0.25, 0.30]]),
        "edu": Cpt(
            "edu",
            ("age",),
            [
                [0.15, 0.45, 0.40],
                [0.20, 0.45, 0.35],
                [0.30, 0.45, 0.25],
                [0.45, 0.40, 0.15],
            ],
        ),
        "mun": Cpt("mun", (), [[0.25, 0.30, 0.25, 0.185, 0.015]]),
        "income": Cpt(
            "income",
            ("edu",),
            [
                [0.45, 0.30, 0.10, 0.15],
                [0.25, 0.40, 0.20, 0.15],
                [0.10, 0.35, 0.45, 0.10],
            ],
        ),
        "party": Cpt(
            "party",
            ("edu",),
            [
                [0.18, 0.06, 0.07, 0.26, 0.16, 0.05, 0.06, 0.16],
                [0.17, 0.12, 0.07, 0.25, 0.10, 0.08, 0.07, 0.14],
                [0.15, 0.22, 0.08, 0.21, 0.05, 0.11, 0.08, 0.10],
            ],
        ),
        "interest": Cpt("interest", ("sex", "edu"), interest_rows),
        "informed": Cpt("informed", ("interest",), _monotone_rows(4, grad=1.6)),
        "media": Cpt("media", ("age",), yes_no([0.80, 0.85, 0.82, 0.70])),
        "search": Cpt("search", ("interest",), yes_no([0.10, 0.25, 0.45, 0.70])),
        "friends": Cpt("friends", ("interest",), yes_no([0.25, 0.45, 0.65, 0.85])),
        "easier": Cpt("easier", ("interest",), _monotone_rows(4, grad=1.4)),
        "develop": Cpt(
            "develop",
            ("easier",),
            [
                [0.70, 0.12, 0.18],
                [0.50, 0.27, 0.23],
                [0.28, 0.48, 0.24],
                [0.16, 0.64, 0.20],
            ],
        ),
        "uncontrol": Cpt("uncontrol", ("easier",), _monotone_rows(4, grad=-1.5)),
        "euappr": Cpt(
            "euappr",
            ("uncontrol",),
            [
                [0.15, 0.55, 0.20, 0.10],
                [0.17, 0.60, 0.14, 0.09],
                [0.30, 0.52, 0.10, 0.08],
                [0.50, 0.34, 0.08, 0.08],
            ],
        ),
        "heardeu": Cpt(
            "heardeu",
            ("interest", "search"),
            yes_no(
                [
                    min(0.95, base + (0.14 if s == 0 else 0.0))
                    for base in (0.06, 0.15, 0.24, 0.38)
                    for s in (0, 1)
                ]
            ),
        ),
        "aireg": Cpt("aireg", ("euappr",), yes_no([0.93, 0.92, 0.73, 0.87])),
    }
    return FittedNetwork(
        variables, dag, cpts, metadata={"score": "hand-built", "seed": str(SEED)}
    )


# column -> missing-injection rate and missing token
MISSING = {
    "sex": (0.005, "9"), "age": (0.008, "9"), "edu": (0.010, "9"),
    "mun": (0.010, "9"), "party": (0.020, "99"), "interest": (0.015, "9"),
    "informed": (0.015, "9"), "media": (0.010, "9"), "search": (0.010, "9"),
    "friends": (0.010, "9"), "easier": (0.030, "9"), "develop": (0.020, "9"),
    "uncontrol": (0.030, "9"), "aireg": (0.020, "9"),
}

OP_THEMES = {  # opportunity indicators per theme (24 total)
    "PosWork": 5, "PosHealth": 5, "PosLife": 5, "PosTech": 5, "PosGeneral": 4,
}
RK_THEMES = {  # risk indicators per theme (18 total)
    "RiskJobs": 4, "RiskLossOfControl": 4, "RiskMisuseRegulation": 4,
    "RiskData": 3, "RiskSociety": 3,
}


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    net = generator_network()
    save(net, os.path.join(FIXTURES, "survey_generator.bn.yaml"))

    table = sample(net, N_ROWS, seed=SEED)
    rng = np.random.default_rng(SEED + 1)
    names = [v.name for v in net.variables]
    col = {n: i for i, n in enumerate(names)}
    codes = table.codes

    header = list(names)
    op_cols = [f"op{m:02d}" for m in range(1, 25)]
    rk_cols = [f"rk{m:02d}" for m in range(1, 19)]
    header += op_cols + rk_cols

    rows = []
    for i in range(N_ROWS):
        row = []
        for n in names:
            token = str(codes[i, col[n]] + 1)
            rate_tok = MISSING.get(n)
            if rate_tok and rng.random() < rate_tok[0]:
                token = rate_tok[1]
            row.append(token)
        develop = codes[i, col["develop"]]
        easier = codes[i, col["easier"]]
        uncontrol = codes[i, col["uncontrol"]]
        asked_op = develop in (1, 2)  # Opportunity or Both
        asked_rk = develop in (0, 2)  # Risk or Both
        m = 0
        for theme_idx, (theme, size) in enumerate(OP_THEMES.items()):
            tau = min(0.9, 0.18 + 0.15 * easier + 0.04 * theme_idx)
            for k in range(size):
                m += 1
                if not asked_op:
                    row.append("")
                    continue
                weight = 0.30 + 0.35 * ((m * 7) % 10) / 10.0
                row.append("1" if rng.random() < tau * weight else "2")
        m = 0
        for theme_idx, (theme, size) in enumerate(RK_THEMES.items()):
            tau = min(0.9, 0.20 + 0.15 * uncontrol + 0.03 * theme_idx)
            for k in range(size):
                m += 1
                if not asked_rk:
                    row.append("")
                    continue
                weight = 0.30 + 0.35 * ((m * 3) % 10) / 10.0
                row.append("1" if rng.random() < tau * weight else "2")
        rows.append(row)

    out = os.path.join(FIXTURES, "synthetic_survey.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {out} ({N_ROWS} rows x {len(header)} columns)")

    mun_rare = int((codes[:, col["mun"]] == 4).sum())
    print(f"municipality '500k+' count: {mun_rare} (must be < 50 for the collapse demo)")


if __name__ == "__main__":
    main()
