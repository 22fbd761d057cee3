#!/usr/bin/env python3
"""Validates every problems/*.json file against schema/vjp-schema-1.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".")
schema = json.loads((root / "schema" / "vjp-schema-1.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)
failed = 0
for path in sorted((root / "problems").glob("*.json")):
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {'/'.join(map(str, e.path))}: {e.message}")
    failed += bool(errors)
    print(f"{path.name}: {'ok' if not errors else 'invalid'}")
sys.exit(1 if failed else 0)
