"""Exercises the compiled extension end to end against the fixture server."""

import json
import pathlib
import sys

import secaudit

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main() -> int:
    assert secaudit.risk_level("Almost Certain", "Major") == "Extreme"
    assert secaudit.risk_level("Rare", "Insignificant") == "Very Low"

    checklist = secaudit.Checklist.default()
    assert len(checklist) == 48
    again = secaudit.Checklist.from_text(checklist.to_text())
    assert again.ids() == checklist.ids()
    first = checklist.ids()[0]
    print("first parameter:", checklist.parameter(first))

    docs = [secaudit.reference_document(label) for label in secaudit.REFERENCE_LABELS]
    for doc in docs:
        parsed = secaudit.AuditDocument.from_json(doc.to_json())
        assert parsed.to_json() == doc.to_json()
        print(doc, doc.risk_counts())
    print(secaudit.coverage_table(docs, "markdown"))
    matrix = secaudit.compliance_matrix(docs, "csv")
    assert len(matrix.strip().splitlines()) == 49

    tampered = json.loads(docs[0].to_json())
    tampered["records"] = tampered["records"][1:]
    try:
        secaudit.AuditDocument.from_json(json.dumps(tampered))
        raise AssertionError("tampered document accepted")
    except ValueError as e:
        print("tampered document rejected:", e)

    corpus = ROOT / "crates/core/tests/fixtures/static_corpus/05-plaintext"
    static = secaudit.analyze(str(corpus))
    print("static:", static.values())

    testbed = secaudit.Testbed("deepseek")
    try:
        doc = secaudit.scan(testbed.target_toml, destructive=True)
    finally:
        testbed.stop()
    assert doc.skipped() == [], doc.skipped()
    assert doc.at_or_above("Extreme") == 3, doc.risk_counts()
    print("scan:", doc, doc.risk_counts())
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
