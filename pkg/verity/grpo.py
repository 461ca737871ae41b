from typing import List, Sequence, Tuple, Union

import numpy

from verity.exceptions import ConfigError, GroupTooSmall, NonFiniteGradient, SupportMismatch
from verity.typing import Group, Policy, StepStats, TrainerConfig

Seed = Union[int, Sequence[int]]


def uniform_policy(action_total: int) -> Policy:
    return numpy.zeros(action_total, dtype=float)


def freeze_policy(policy: Policy) -> Policy:
    reference = numpy.array(policy, dtype=float, copy=True)
    reference.setflags(write=False)
    return reference


def log_softmax(logits: Policy) -> Policy:
    shifted = logits - numpy.max(logits)
    return shifted - numpy.log(numpy.sum(numpy.exp(shifted)))


def softmax(logits: Policy) -> Policy:
    return numpy.exp(log_softmax(logits))


def validate_policy(policy: Policy) -> None:
    if policy.ndim != 1 or policy.size == 0 or not numpy.all(numpy.isfinite(policy)):
        raise ConfigError('Policy logits must be a non-empty vector of finite values.')


def validate_trainer_config(trainer_config: TrainerConfig) -> None:
    if trainer_config.group_size < 2:
        raise ConfigError(f'Group size must be at least 2, got {trainer_config.group_size}.')
    if trainer_config.learning_rate <= 0:
        raise ConfigError(f'Learning rate must be positive, got {trainer_config.learning_rate}.')
    if trainer_config.beta < 0 or trainer_config.std_floor < 0 or trainer_config.steps < 0 or trainer_config.seed < 0:
        raise ConfigError('Beta, std floor, steps and seed must not be negative.')


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> List[float]:
    values = numpy.asarray(rewards, dtype=float)
    if values.size < 2:
        raise GroupTooSmall(f'A group needs at least 2 rewards, got {values.size}.')
    if numpy.all(values == values[0]):
        return [0.0] * values.size
    scale = max(float(values.std()), eps)
    return ((values - values.mean()) / scale).tolist()


def kl_divergence(policy: Policy, reference: Policy) -> float:
    if policy.shape != reference.shape:
        raise SupportMismatch(f'Policies cover {policy.size} and {reference.size} actions.')
    log_policy = log_softmax(policy)
    log_reference = log_softmax(reference)
    probabilities = numpy.exp(log_policy)
    support = probabilities > 0
    if numpy.any(support & ~numpy.isfinite(log_reference)):
        raise SupportMismatch('Reference assigns zero probability inside the policy support.')
    divergence = numpy.sum(probabilities[support] * (log_policy[support] - log_reference[support]))
    return max(float(divergence), 0.0)


def rlvr_objective(reward: float, kl: float, beta: float) -> float:
    return reward - beta * kl


def grpo_objective(policy: Policy, reference: Policy, actions: Sequence[int], advantages: Sequence[float], beta: float) -> float:
    log_policy = log_softmax(policy)
    surrogate = float(numpy.sum(numpy.asarray(advantages, dtype=float) * log_policy[numpy.asarray(actions, dtype=int)]))
    return surrogate - beta * kl_divergence(policy, reference)


def grpo_gradient(policy: Policy, reference: Policy, actions: Sequence[int], advantages: Sequence[float], beta: float) -> Policy:
    probabilities = softmax(policy)
    weights = numpy.asarray(advantages, dtype=float)
    gradient = numpy.zeros_like(probabilities)
    numpy.add.at(gradient, numpy.asarray(actions, dtype=int), weights)
    gradient -= probabilities * numpy.sum(weights)
    if beta:
        log_ratio = log_softmax(policy) - log_softmax(reference)
        kl = numpy.sum(probabilities * log_ratio)
        gradient -= beta * probabilities * (log_ratio - kl)
    return gradient


def grpo_step(policy: Policy, reference: Policy, group: Group, trainer_config: TrainerConfig) -> Tuple[Policy, StepStats]:
    validate_policy(policy)
    validate_policy(reference)
    if len(group.actions) < 2:
        raise GroupTooSmall(f'A group needs at least 2 responses, got {len(group.actions)}.')
    if len(group.advantages) != len(group.actions):
        raise ConfigError('Group advantages must be computed before the policy update.')
    gradient = grpo_gradient(policy, reference, group.actions, group.advantages, trainer_config.beta)
    if not numpy.all(numpy.isfinite(gradient)):
        raise NonFiniteGradient('Policy gradient contains non-finite values.')
    kl = kl_divergence(policy, reference)
    mean_reward = float(numpy.mean(group.rewards)) if group.rewards else 0.0
    stats = StepStats(
        mean_reward=mean_reward,
        kl=kl,
        objective=rlvr_objective(mean_reward, kl, trainer_config.beta),
        grad_norm=float(numpy.linalg.norm(gradient))
    )
    return policy + trainer_config.learning_rate * gradient, stats


def sample_group(policy: Policy, group_size: int, seed: Seed, query_id: str = '') -> Group:
    validate_policy(policy)
    generator = numpy.random.default_rng(seed)
    actions = generator.choice(policy.size, size=group_size, p=softmax(policy))
    return Group(query_id, tuple(int(action) for action in actions), ())
