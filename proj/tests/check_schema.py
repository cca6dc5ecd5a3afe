"""Validates configuration documents against the published schema."""
import json
import sys

import jsonschema


def main(schema_path, *docs):
    with open(schema_path) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    for path in docs:
        with open(path) as f:
            doc = json.load(f)
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        for e in errors:
            print(f"{path}: {'/'.join(map(str, e.path))}: {e.message}")
        if errors:
            return 1
    # A misspelled key must be caught by the schema, not only by the loader.
    bad = json.loads(json.dumps(doc))
    bad["coils"]["curent"] = "3 A"
    if validator.is_valid(bad):
        print("schema accepted an unknown key")
        return 1
    bad = json.loads(json.dumps(doc))
    bad["coils"]["current"] = "three amps"
    if validator.is_valid(bad):
        print("schema accepted a malformed quantity")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
