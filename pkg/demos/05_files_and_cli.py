"""Chain files and the command-line pipeline.

Writes a chain to NDJSON, reads it back, then drives the same steps through
the ``pivotal-relabel`` entry point and lists the files it produced.

Run:  python demos/05_files_and_cli.py
"""

import tempfile
from pathlib import Path

from pivotal_relabel import load_chain, save_chain, validate_chain
from pivotal_relabel.cli import main
from pivotal_relabel.sim_harness import ScenarioSpec, generate_scenario, gibbs_scale_mixture

out = Path(tempfile.mkdtemp(prefix="pivotal-demo-"))

sample = generate_scenario(ScenarioSpec("A", n=200), seed=0)
chain = gibbs_scale_mixture(sample.data, 4, 300, 100, permute_move=True, seed=0)
save_chain(chain, out / "chain.ndjson")
back = load_chain(out / "chain.ndjson")
print("round trip exact:", back.equals(chain), "| violations:", validate_chain(back))
print("first record:", (out / "chain.ndjson").read_text().splitlines()[1][:100], "...")

code = main(["relabel", "--chain", str(out / "chain.ndjson"), "--criterion", "e",
             "--out", str(out / "relabelled")])
print("relabel exit code", code)

code = main(["compare", "--scenario", "B", "--n", "200", "--iters", "500", "--burnin", "100",
             "--reps", "2", "--baseline", "ordering", "--baseline", "stephens",
             "--out", str(out / "compare")])
print("compare exit code", code)
for path in sorted((out / "compare").iterdir()):
    print(f"  {path.name:26} {path.stat().st_size:>9} bytes")
