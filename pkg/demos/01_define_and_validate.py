"""Define an experiment with three documents and validate it.

An experiment is three YAML files: layers_services.yaml places services on
abstract layers and names the testbed environments that provide machines;
network.yaml constrains links between layers; workflow.yaml describes the
prepare/launch/finalize phases. The network and workflow files never mention
a testbed, so replicating on different hardware means editing only the
layers file.
"""

from pathlib import Path

from contbench.config import load_experiment, validate, validate_documents
from contbench.providers import make_provider

SAVANNA = Path(__file__).resolve().parent.parent / "experiments" / "savanna"

cfg = load_experiment(SAVANNA)
print(f"loaded {SAVANNA.name}: "
      f"{len(cfg.layers_services.layers)} layers, "
      f"{sum(len(l.services) for l in cfg.layers_services.layers)} services, "
      f"{len(cfg.network.rules)} directed network rules, "
      f"{len(cfg.workflow.tasks)} workflow tasks")
print(f"config digest: {cfg.digest}")

catalog = make_provider("simulated").catalog
issues = validate(cfg, catalog)
print(f"validation issues: {issues or 'none — deployable'}")

# Break the network file on purpose: reference a layer that does not exist.
docs = dict(cfg.documents)
broken = docs["network.yaml"].replace("src: edge", "src: fog")
_, issues = validate_documents(docs["layers_services.yaml"], broken, docs["workflow.yaml"], catalog)
print("\nafter pointing a rule at layer 'fog':")
for issue in issues:
    print(" ", issue.render())
