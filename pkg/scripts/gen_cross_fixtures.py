"""Regenerate the training harness's cross-component test fixtures.

Produces, from the compiler:
  - the controller spec's DL2 loss program,
  - 20 random weight settings with their reference-interpreter loss values,
  - golden outputs of the sampling generator.

Run from the repository root:  python scripts/gen_cross_fixtures.py
"""
import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from specbridge import frontend, typecheck  # noqa: E402
from specbridge.loss import (  # noqa: E402
    Logic, compile_loss, eval_loss, sample_uniform,
)
from specbridge.network import network_from_dict  # noqa: E402
from specbridge.resources import ResourceEnv  # noqa: E402


def random_net_doc(rng, dims):
    layers = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        act = "id" if i == len(dims) - 2 else "relu"
        layers.append({
            "W": [[f"{rng.gauss(0, 0.8):.6f}" for _ in range(a)]
                  for _ in range(b)],
            "b": [f"{rng.gauss(0, 0.3):.6f}" for _ in range(b)],
            "act": act,
        })
    return {"layers": layers}


def main():
    out_dir = REPO / "train-harness" / "tests" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)

    tp = typecheck.check_program(frontend.load(
        (REPO / "fixtures" / "controller.vcl").read_text()))
    lp = compile_loss(tp, "safe", Logic("dl2"))

    rng = random.Random(20240901)
    cases = []
    for i in range(20):
        dims = rng.choice([[2, 4, 1], [2, 4, 4, 1], [2, 6, 1]])
        doc = random_net_doc(rng, dims)
        net = network_from_dict(doc)
        seed = rng.randint(0, 10**6)
        samples = rng.choice([5, 10, 20])
        value = eval_loss(lp, ResourceEnv(networks={"controller": net}),
                          seed, samples)
        cases.append({"network": doc, "seed": seed, "samples": samples,
                      "loss": repr(value)})

    good = {"layers": [{"W": [["-16", "8"]], "b": ["4"], "act": "id"}]}
    good_loss = eval_loss(
        lp, ResourceEnv(networks={"controller": network_from_dict(good)}),
        seed=0, samples=500)

    (out_dir / "cross_agreement.json").write_text(json.dumps({
        "loss_program": lp,
        "cases": cases,
        "good_controller": {"network": good, "seed": 0, "samples": 500,
                            "loss": repr(good_loss)},
    }, indent=1, sort_keys=True) + "\n")

    goldens = []
    g = random.Random(7)
    for _ in range(40):
        keys = [g.randint(0, 2**40) for _ in range(g.randint(1, 6))]
        goldens.append({"keys": keys, "u": repr(sample_uniform(keys))})
    (out_dir / "sampler_golden.json").write_text(
        json.dumps({"cases": goldens}, indent=1) + "\n")

    print(f"wrote fixtures to {out_dir}")


if __name__ == "__main__":
    main()
