"""Runs the CLI and validates its outputs against the JSON schemas."""
import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import jsonschema

REPORT_HEADER = ["record_type", "column", "level", "level_b", "label", "label_b", "quantity", "estimate",
                 "std_error", "ci_lower", "ci_upper", "count", "count_b", "status"]
KERNEL_HEADER = ["column", "from_level", "to_level", "from_label", "to_label", "probability"]


def run(cli, *args):
    res = subprocess.run([cli, *args], capture_output=True, text=True)
    if res.returncode != 0:
        raise SystemExit(f"{' '.join(args)} exited {res.returncode}: {res.stderr}")
    return res.stdout


def main():
    cli, schema_dir, data_dir = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    schemas = {p.stem.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    tooth = str(data_dir / "toothgrowth.csv")
    model = str(data_dir / "models" / "example1.json")
    checked = 0

    for p in (data_dir / "models").glob("*.json"):
        doc = json.loads(p.read_text())
        jsonschema.validate(doc, schemas["experiment" if "model-ref" in doc else "model"])
        checked += 1

    reports = [
        run(cli, "estimate", "--data", tooth, "--factors", "supp,dose", "--response", "len", "--format", "json"),
        run(cli, "estimate", "--data", tooth, "--factors", "supp,dose", "--response", "len", "--estimator", "naive",
            "--format", "json"),
        run(cli, "compare", "--data", tooth, "--factors", "supp,dose", "--response", "len", "--column", "2",
            "--format", "json"),
        run(cli, "validate", "--model", model, "--replicates", "10", "--format", "json"),
    ]
    for text in reports:
        jsonschema.validate(json.loads(text), schemas["report"])
        checked += 1

    kernel = run(cli, "kernel", "--data", tooth, "--factors", "supp,dose", "--response", "len", "--format", "json")
    jsonschema.validate(json.loads(kernel), schemas["model"])
    checked += 1

    rows = list(csv.reader(io.StringIO(run(cli, "estimate", "--data", tooth, "--factors", "supp,dose",
                                           "--response", "len"))))
    assert rows[0] == REPORT_HEADER, rows[0]
    assert all(len(r) == len(REPORT_HEADER) for r in rows)
    rows = list(csv.reader(io.StringIO(run(cli, "kernel", "--data", tooth, "--factors", "supp,dose",
                                           "--response", "len"))))
    assert rows[0] == KERNEL_HEADER, rows[0]
    checked += 2
    print(f"{checked} documents valid")


if __name__ == "__main__":
    main()
