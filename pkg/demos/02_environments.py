"""
Reacher and PointGoal
=====================

Forward kinematics of the two-link arm, a short scripted rollout in each
environment, and the success predicate. Both environments are batched: one
call to ``step`` advances many episodes at once.
"""
import numpy as np

from archer import envs

for q in [(0.0, 0.0), (np.pi / 2, 0.0), (0.0, np.pi / 2)]:
    x, y = envs.forward_kinematics(q, 0.5, 0.5)
    print(f"q = ({q[0]:.3f}, {q[1]:.3f})  ->  end effector ({x:+.3f}, {y:+.3f})")

# PointGoal: drive straight at the goal, never stepping past it.
spec = envs.pointgoal_spec()
rng = np.random.default_rng(1)
state = envs.reset(spec, rng)
print(f"\npoint at {state.physical[:2].round(3)}, goal at {state.goal.round(3)}")
while not envs.is_success(spec, state) and state.step_index < spec.episode_length:
    action = np.clip((state.goal - state.physical[:2]) / spec.max_displacement, -1, 1)
    state = envs.step(spec, state, action)
print(f"reached in {state.step_index} steps, distance "
      f"{envs.goal_distance(envs.achieved_goal(spec, state), state.goal):.4f}")

# Reacher: 1000 random-action episodes in one batch, counting lucky successes.
spec = envs.reacher_spec()
state = envs.reset(spec, rng, n=1000)
for _ in range(spec.episode_length):
    state = envs.step(spec, state, rng.uniform(-1.5, 1.5, size=(1000, 2)))
print(f"\nrandom reacher policy: {envs.is_success(spec, state).mean():.3f} success, "
      f"{state.clamped} clamped action components")
