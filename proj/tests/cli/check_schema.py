"""Every shipped scenario validates against the published schema, and an
unknown key is rejected by it."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "schemas" / "scenario.schema.json").read_text())
validator = jsonschema.Draft202012Validator(schema)
validator.check_schema(schema)
configs = sorted((root / "configs").glob("*.json"))
assert configs, "no configs found"
for path in configs:
    validator.validate(json.loads(path.read_text()))
    bad = json.loads(path.read_text())
    bad["unexpected"] = True
    assert not validator.is_valid(bad), path
print(f"{len(configs)} configs valid")
