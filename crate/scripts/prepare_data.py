"""Rebuild the bundled datasets under data/.

German credit comes from the CSV shipped in the `scorecardpy` sdist (decoded
labels, recoded here to the original A-codes). Churn comes from
`modeldata::mlc_churn` as shipped in the `rdatasets` wheel; its first 3333 rows
are the canonical training split and the remaining 1667 the test split.

    pip download scorecardpy rdatasets --no-deps -d /tmp/dl
    python3 scripts/prepare_data.py /tmp/dl
"""
import sys
import tarfile
import zipfile
from pathlib import Path

import pandas as pd

GERMAN_COLUMNS = [
    ("checking_status", "status_of_existing_checking_account", "nominal"),
    ("duration", "duration_in_month", "numeric"),
    ("credit_history", "credit_history", "nominal"),
    ("purpose", "purpose", "nominal"),
    ("credit_amount", "credit_amount", "numeric"),
    ("savings", "savings_account_and_bonds", "nominal"),
    ("employment_since", "present_employment_since", "nominal"),
    ("installment_rate", "installment_rate_in_percentage_of_disposable_income", "numeric"),
    ("personal_status_sex", "personal_status_and_sex", "nominal"),
    ("other_debtors", "other_debtors_or_guarantors", "nominal"),
    ("residence_since", "present_residence_since", "numeric"),
    ("property", "property", "nominal"),
    ("age", "age_in_years", "numeric"),
    ("other_installment_plans", "other_installment_plans", "nominal"),
    ("housing", "housing", "nominal"),
    ("existing_credits", "number_of_existing_credits_at_this_bank", "numeric"),
    ("job", "job", "nominal"),
    ("people_liable", "number_of_people_being_liable_to_provide_maintenance_for", "numeric"),
    ("telephone", "telephone", "nominal"),
    ("foreign_worker", "foreign_worker", "nominal"),
]

GERMAN_CODES = {
    "status_of_existing_checking_account": {
        "... < 0 DM": "A11",
        "0 <= ... < 200 DM": "A12",
        "... >= 200 DM / salary assignments for at least 1 year": "A13",
        "no checking account": "A14",
    },
    "credit_history": {
        "no credits taken/ all credits paid back duly": "A30",
        "all credits at this bank paid back duly": "A31",
        "existing credits paid back duly till now": "A32",
        "delay in paying off in the past": "A33",
        "critical account/ other credits existing (not at this bank)": "A34",
    },
    "purpose": {
        "car (new)": "A40",
        "car (used)": "A41",
        "furniture/equipment": "A42",
        "radio/television": "A43",
        "domestic appliances": "A44",
        "repairs": "A45",
        "education": "A46",
        "retraining": "A48",
        "business": "A49",
        "others": "A410",
    },
    "savings_account_and_bonds": {
        "... < 100 DM": "A61",
        "100 <= ... < 500 DM": "A62",
        "500 <= ... < 1000 DM": "A63",
        "... >= 1000 DM": "A64",
        "unknown/ no savings account": "A65",
    },
    "present_employment_since": {
        "unemployed": "A71",
        "... < 1 year": "A72",
        "1 <= ... < 4 years": "A73",
        "4 <= ... < 7 years": "A74",
        "... >= 7 years": "A75",
    },
    "personal_status_and_sex": {
        "male : divorced/separated": "A91",
        "female : divorced/separated/married": "A92",
        "male : single": "A93",
        "male : married/widowed": "A94",
    },
    "other_debtors_or_guarantors": {"none": "A101", "co-applicant": "A102", "guarantor": "A103"},
    "property": {
        "real estate": "A121",
        "building society savings agreement/ life insurance": "A122",
        "car or other, not in attribute Savings account/bonds": "A123",
        "unknown / no property": "A124",
    },
    "other_installment_plans": {"bank": "A141", "stores": "A142", "none": "A143"},
    "housing": {"rent": "A151", "own": "A152", "for free": "A153"},
    "job": {
        "unemployed/ unskilled - non-resident": "A171",
        "unskilled - resident": "A172",
        "skilled employee / official": "A173",
        "management/ self-employed/ highly qualified employee/ officer": "A174",
    },
    "telephone": {"none": "A191", "yes, registered under the customers name": "A192"},
    "foreign_worker": {"yes": "A201", "no": "A202"},
}

CHURN_KINDS = {
    "state": "nominal",
    "area_code": "nominal",
    "international_plan": "nominal",
    "voice_mail_plan": "nominal",
    "churn": "target",
}


def write_schema(path, columns, positive):
    lines = [f"{name} = {kind}" for name, kind in columns]
    lines.append(f"positive_label = {positive}")
    path.write_text("\n".join(lines) + "\n")


def main(dl):
    out = Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)

    with tarfile.open(next(dl.glob("scorecardpy-*.tar.gz"))) as tar:
        member = next(m for m in tar.getmembers() if m.name.endswith("data/germancredit.csv"))
        raw = pd.read_csv(tar.extractfile(member))
    german = pd.DataFrame()
    for name, source, kind in GERMAN_COLUMNS:
        col = raw[source]
        german[name] = col.map(GERMAN_CODES[source]) if kind == "nominal" else col
    assert not german.isna().any().any()
    german["class"] = raw["creditability"]
    german.to_csv(out / "german_credit.csv", index=False)
    write_schema(
        out / "german_credit.schema",
        [(n, k) for n, _, k in GERMAN_COLUMNS] + [("class", "target")],
        "good",
    )

    with zipfile.ZipFile(next(dl.glob("rdatasets-*.whl"))) as z:
        with z.open("rdatasets/_data/modeldata/mlc_churn.pkl.compress") as f:
            churn = pd.read_pickle(f, compression="xz")
    churn = churn.drop(columns=["rownames"])
    churn.iloc[:3333].to_csv(out / "churn_train.csv", index=False)
    churn.iloc[3333:].to_csv(out / "churn_test.csv", index=False)
    write_schema(
        out / "churn.schema",
        [(c, CHURN_KINDS.get(c, "numeric")) for c in churn.columns],
        "yes",
    )


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/dl"))
