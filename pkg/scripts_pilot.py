import dataclasses
import time

import numpy as np

from filteraware.experiment import default_config, run_collect, run_eval, run_train
from filteraware.trackability import heatmap
from filteraware.experiment import make_env

t0 = time.time()
cfg = dataclasses.replace(default_config("darkzone"), seed=7, collect_n=150)

easy = run_eval(cfg, "easy", n=20)
print(f"[{time.time()-t0:6.1f}s] easy   success={easy.success_rate:.2f} "
      f"err={easy.mean_tracking_error:.4f} hz={easy.planner_hz:.1f}")

rollouts = run_collect(cfg)
errs = np.concatenate([r.errors for r in rollouts])
print(f"[{time.time()-t0:6.1f}s] collect n={len(rollouts)} err mean={errs.mean():.4f} "
      f"p50={np.median(errs):.4f} p90={np.quantile(errs, 0.9):.4f} max={errs.max():.3f}")

cfg_fast = dataclasses.replace(cfg, track=dataclasses.replace(cfg.track, steps=2000))
net, meta, loss = run_train(cfg_fast, rollouts)
print(f"[{time.time()-t0:6.1f}s] train loss={loss:.5f}")

env = make_env(cfg, "vanilla")
grid = heatmap(net, env, 100)
states = env.grid_states(100)
inside = (np.linalg.norm(states - [0.5, 0.5], axis=-1) < 0.3).reshape(100, 100)
m_in, m_out = grid[inside].mean(), grid[~inside].mean()
print(f"[{time.time()-t0:6.1f}s] heatmap inside={m_in:.3f} outside={m_out:.3f} "
      f"ratio={m_in/max(m_out,1e-9):.2f} grid_min={grid.min():.3f} grid_max={grid.max():.3f}")

vanilla = run_eval(cfg, "vanilla", n=20)
print(f"[{time.time()-t0:6.1f}s] hard vanilla success={vanilla.success_rate:.2f} "
      f"err={vanilla.mean_tracking_error:.4f} hz={vanilla.planner_hz:.1f}")

aware = run_eval(cfg, "filteraware", net=net, n=20)
print(f"[{time.time()-t0:6.1f}s] filteraware success={aware.success_rate:.2f} "
      f"err={aware.mean_tracking_error:.4f} hz={aware.planner_hz:.1f}")
print(f"ratio hz: {aware.planner_hz/vanilla.planner_hz:.3f}")
