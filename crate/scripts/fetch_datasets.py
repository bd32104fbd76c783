#!/usr/bin/env python3
"""Rebuild the CSV datasets under data/ from copies published on PyPI.

Spambase and German credit come from the `keel-ds` wheel, Car from the
Orange 2.7.8 wheel (its bundled datasets folder). Churn Modelling is a
Kaggle download and has to be placed at data/churn.csv by hand.
"""
import io
import json
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

ORANGE_WHEEL = (
    "https://files.pythonhosted.org/packages/bb/4e/"
    "540bf3fe40ec0a35480e0476f6bbc08cd04638c49de372d31dd50df2773a/"
    "Orange-2.7.8-cp27-none-win32.whl"
)

SPAM_WORDS = (
    "make address all 3d our over remove internet order mail receive will people "
    "report addresses free business email you credit your font 000 money hp hpl "
    "george 650 lab labs telnet 857 data 415 85 technology 1999 parts pm direct cs "
    "meeting original project re edu table conference"
).split()
SPAM_CHARS = ["3B", "28", "5B", "21", "24", "23"]
SPAM_COLUMNS = (
    [f"word_freq_{w}" for w in SPAM_WORDS]
    + [f"char_freq_{c}" for c in SPAM_CHARS]
    + [
        "capital_run_length_average",
        "capital_run_length_longest",
        "capital_run_length_total",
        "class",
    ]
)

CREDIT_COLUMNS = [
    ("checking_status", "nominal"),
    ("duration", "numeric"),
    ("credit_history", "nominal"),
    ("purpose", "nominal"),
    ("credit_amount", "numeric"),
    ("savings_status", "nominal"),
    ("employment", "nominal"),
    ("installment_commitment", "numeric"),
    ("personal_status", "nominal"),
    ("other_parties", "nominal"),
    ("residence_since", "numeric"),
    ("property_magnitude", "nominal"),
    ("age", "numeric"),
    ("other_payment_plans", "nominal"),
    ("housing", "nominal"),
    ("existing_credits", "numeric"),
    ("job", "nominal"),
    ("num_dependents", "numeric"),
    ("own_telephone", "nominal"),
    ("foreign_worker", "nominal"),
    ("class", "label"),
]

CAR_ORDER = {
    "buying": ["low", "med", "high", "v-high"],
    "maint": ["low", "med", "high", "v-high"],
    "doors": ["2", "3", "4", "5-more"],
    "persons": ["2", "4", "more"],
    "lug_boot": ["small", "med", "big"],
    "safety": ["low", "med", "high"],
}


def pip_download(spec: str, dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", spec, "-d", str(dest)],
        check=True,
    )
    return next(dest.glob("*.whl"))


def keel_rows(wheel: pathlib.Path, name: str):
    text = zipfile.ZipFile(wheel).read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    for line in text.splitlines():
        if line and not line.startswith("@"):
            yield [v.strip() for v in line.split(",")]


def write_csv(path: pathlib.Path, header, rows):
    with path.open("w", newline="") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")


def write_schema(path: pathlib.Path, columns):
    cols = []
    for name, kind, *order in columns:
        c = {"name": name, "kind": kind}
        if order:
            c["ordinal_order"] = order[0]
        cols.append(c)
    path.write_text(json.dumps({"columns": cols}, indent=2) + "\n")


def main():
    DATA.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        keel = pip_download("keel-ds==0.2.5", tmp / "keel")

        write_csv(DATA / "spambase.csv", SPAM_COLUMNS, keel_rows(keel, "spambase"))
        write_schema(
            DATA / "spambase.schema.json",
            [(c, "numeric") for c in SPAM_COLUMNS[:-1]] + [("class", "label")],
        )

        write_csv(DATA / "credit_g.csv", [c for c, _ in CREDIT_COLUMNS], keel_rows(keel, "german"))
        write_schema(DATA / "credit_g.schema.json", CREDIT_COLUMNS)

        with urllib.request.urlopen(ORANGE_WHEEL) as resp:
            orange = zipfile.ZipFile(io.BytesIO(resp.read()))
        lines = orange.read("Orange/datasets/car.tab").decode().splitlines()[3:]
        header = list(CAR_ORDER) + ["class"]
        write_csv(DATA / "car.csv", header, (l.split("\t") for l in lines if l.strip()))
        write_schema(
            DATA / "car.schema.json",
            [(c, "ordinal", o) for c, o in CAR_ORDER.items()] + [("class", "label")],
        )

    churn = [
        ("RowNumber", "drop"),
        ("CustomerId", "drop"),
        ("Surname", "drop"),
        ("CreditScore", "numeric"),
        ("Geography", "nominal"),
        ("Gender", "nominal"),
        ("Age", "numeric"),
        ("Tenure", "numeric"),
        ("Balance", "numeric"),
        ("NumOfProducts", "numeric"),
        ("HasCrCard", "numeric"),
        ("IsActiveMember", "numeric"),
        ("EstimatedSalary", "numeric"),
        ("Exited", "label"),
    ]
    write_schema(DATA / "churn.schema.json", churn)


if __name__ == "__main__":
    main()
