"""Run the bundled scenarios with and without the overhead camera and
compare the scores."""

from courtfusion.sim import PipelineConfig, aggregate, load_scenario, run_pipeline, simulate

spec = load_scenario("crossing")
frames = list(simulate(spec, seed=3))
merged = [f.frame_index for f in frames if len(f.rear_observations) < len(f.top_detections)]
print(f"{spec.name}: {spec.n_frames} frames, rear view merges players in {len(merged)} of them")

for rear_only in (False, True):
    reports = [run_pipeline(spec, PipelineConfig(rear_only=rear_only), seed=s).report for s in range(20)]
    total = aggregate(reports)
    label = "rear camera only" if rear_only else "both cameras"
    print(f"{label:>16}: {total.to_dict()}")

res = run_pipeline(load_scenario("exit_return"), seed=0)
print("exit_return ids per player:",
      {name: sorted({p for p in ids if p is not None}) for name, ids in res.player_ids.items()})
print("registry:", res.registry.to_json())
