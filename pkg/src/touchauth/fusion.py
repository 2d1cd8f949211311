"""Joining stroke and motion sources into pseudo-users, and the per-user
train/test protocol.

Each pseudo-user takes its strokes from one stroke-source user and its
motion snapshots from a paired motion-source user. The i-th stroke is joined
with motion snapshot ``i * stride`` where
``stride = snapshot_count // stroke_count``.

Every split holds 80 genuine + 80 impostor training samples and 20 genuine +
50 impostor test samples. Training impostors are dealt round-robin over the
50 other users (so 30 users give two samples and 20 give one), and each test
impostor comes from a sample that no training set of that split uses.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dataset import FusedDataset, FusedSample
from .errors import FusionError, SplitError

TRAIN_GENUINE = 80
TEST_GENUINE = 20
TRAIN_IMPOSTOR = 80
IMPOSTOR_USERS = 50

_MASK64 = (1 << 64) - 1


def stable_hash(user_id) -> int:
    """64-bit hash of a user id that is stable across processes."""
    digest = hashlib.sha256(str(user_id).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_seed(seed, *parts) -> int:
    """Combine a 64-bit seed with labels by xor of their stable hashes."""
    out = int(seed) & _MASK64
    for part in parts:
        out ^= stable_hash(part)
    return out


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def _group(records):
    groups: dict[str, list] = {}
    for r in records:
        groups.setdefault(str(r.user_id), []).append(r)
    return groups


def _order_snapshots(snapshots):
    if snapshots and all(s.timestamp is not None for s in snapshots):
        return sorted(snapshots, key=lambda s: s.timestamp)
    return list(snapshots)


def identity_pairing(stroke_users, motion_users) -> dict[str, str]:
    """Pair the j-th stroke user with the j-th motion user (first-seen order)."""
    if len(motion_users) < len(stroke_users):
        raise FusionError(
            f"{len(stroke_users)} stroke users but only {len(motion_users)} motion users"
        )
    return dict(zip(stroke_users, motion_users))


def shuffled_pairing(stroke_users, motion_users, seed) -> dict[str, str]:
    """Seeded random one-to-one pairing, an alternative to identity pairing."""
    if len(motion_users) < len(stroke_users):
        raise FusionError(
            f"{len(stroke_users)} stroke users but only {len(motion_users)} motion users"
        )
    order = _rng(seed).permutation(len(motion_users))
    return {u: motion_users[j] for u, j in zip(stroke_users, order)}


def fuse(strokes, motions, pairing=None, seed=0, samples_per_user=None) -> FusedDataset:
    """Join strokes with stride-decimated motion snapshots.

    Parameters
    ----------
    strokes, motions : sequences of StrokeRecord / MotionRecord
        Input order defines each user's stroke order. Motion snapshots are
        ordered by timestamp when every snapshot of a user has one, else by
        input order.
    pairing : dict, "identity", "shuffled" or None
        Stroke user -> motion user. ``None`` and ``"identity"`` pair users in
        first-seen order; ``"shuffled"`` draws a permutation from ``seed``.
    samples_per_user : int, optional
        Keep only each user's first N strokes.

    The fused user id is the stroke-source user id.
    """
    stroke_groups = _group(strokes)
    motion_groups = _group(motions)
    stroke_users, motion_users = list(stroke_groups), list(motion_groups)

    if pairing is None or pairing == "identity":
        pairing = identity_pairing(stroke_users, motion_users)
    elif pairing == "shuffled":
        pairing = shuffled_pairing(stroke_users, motion_users, seed)
    else:
        pairing = {str(k): str(v) for k, v in dict(pairing).items()}

    missing = [u for u in stroke_users if u not in pairing]
    if missing:
        raise FusionError(f"unpaired user {missing[0]!r}")
    extra = [u for u in pairing if u not in stroke_groups]
    if extra:
        raise FusionError(f"roster mismatch: pairing names unknown stroke user {extra[0]!r}")
    targets = list(pairing.values())
    if len(set(targets)) != len(targets):
        raise FusionError("pairing maps two stroke users to the same motion user")

    samples = []
    for user in stroke_users:
        user_strokes = stroke_groups[user]
        if samples_per_user is not None:
            if len(user_strokes) < samples_per_user:
                raise FusionError(
                    f"user {user!r} has {len(user_strokes)} strokes, "
                    f"fewer than {samples_per_user}"
                )
            user_strokes = user_strokes[:samples_per_user]
        motion_user = pairing[user]
        if motion_user not in motion_groups:
            raise FusionError(f"roster mismatch: no motion data for {motion_user!r}")
        snapshots = _order_snapshots(motion_groups[motion_user])
        if len(snapshots) < len(user_strokes):
            raise FusionError(
                f"insufficient motion snapshots for {user!r}: "
                f"{len(snapshots)} < {len(user_strokes)}"
            )
        stride = len(snapshots) // len(user_strokes)
        for i, stroke in enumerate(user_strokes):
            samples.append(
                FusedSample(user, stroke.features, snapshots[i * stride].features)
            )
    return FusedDataset(tuple(samples))


@dataclass(frozen=True)
class UserSplit:
    """Dataset indices of one user's training and test sets."""

    target: str
    train_genuine: tuple[int, ...]
    train_impostor: tuple[int, ...]
    test_genuine: tuple[int, ...]
    test_impostor: tuple[int, ...]
    seed: int

    @property
    def train_indices(self) -> tuple[int, ...]:
        return self.train_genuine + self.train_impostor

    @property
    def train_labels(self) -> np.ndarray:
        return np.array([1] * len(self.train_genuine) + [0] * len(self.train_impostor))

    @property
    def test_indices(self) -> tuple[int, ...]:
        return self.test_genuine + self.test_impostor

    @property
    def test_labels(self) -> np.ndarray:
        return np.array([1] * len(self.test_genuine) + [0] * len(self.test_impostor))

    def manifest_lines(self) -> list[str]:
        """``target,phase,index`` audit lines."""
        lines = []
        for phase in ("train_genuine", "train_impostor", "test_genuine", "test_impostor"):
            lines += [f"{self.target},{phase},{i}" for i in getattr(self, phase)]
        return lines


def build_user_split(dataset: FusedDataset, target, seed) -> UserSplit:
    """Build the 80/80 training and 20/50 test sets for ``target``.

    The genuine samples are shuffled with ``seed``; the first 80 train and
    the next 20 test. Impostor users are visited in a seeded order, each
    with its own seeded sample order. One sample per user is reserved for
    the test set, and training samples are dealt round-robin from the rest.
    """
    target = str(target)
    genuine = dataset.indices_of(target)
    needed = TRAIN_GENUINE + TEST_GENUINE
    if len(genuine) < needed:
        raise SplitError(
            f"user {target!r} has {len(genuine)} samples, needs {needed}", user_id=target
        )
    others = [u for u in dataset.roster if u != target]
    if len(others) < IMPOSTOR_USERS:
        raise SplitError(
            f"user {target!r}: only {len(others)} impostor users, needs {IMPOSTOR_USERS}",
            user_id=target,
        )

    rng = _rng(seed)
    order = rng.permutation(len(genuine))
    shuffled = [genuine[i] for i in order]
    train_genuine = tuple(shuffled[:TRAIN_GENUINE])
    test_genuine = tuple(shuffled[TRAIN_GENUINE:needed])

    chosen = [others[i] for i in rng.permutation(len(others))[:IMPOSTOR_USERS]]
    pools = []
    for user in chosen:
        idx = dataset.indices_of(user)
        pools.append([idx[i] for i in rng.permutation(len(idx))])

    # pool[0] of every user is its test impostor; training draws from pool[1:].
    test_impostor = tuple(pool[0] for pool in pools)
    taken = [0] * len(pools)
    train_impostor = []
    while len(train_impostor) < TRAIN_IMPOSTOR:
        progressed = False
        for k, pool in enumerate(pools):
            if len(train_impostor) == TRAIN_IMPOSTOR:
                break
            if taken[k] + 1 < len(pool):
                taken[k] += 1
                train_impostor.append(pool[taken[k]])
                progressed = True
        if not progressed:
            raise SplitError(
                f"user {target!r}: impostor users have too few samples for "
                f"{TRAIN_IMPOSTOR} disjoint training impostors",
                user_id=target,
            )
    return UserSplit(
        target=target,
        train_genuine=train_genuine,
        train_impostor=tuple(train_impostor),
        test_genuine=test_genuine,
        test_impostor=test_impostor,
        seed=int(seed) & _MASK64,
    )


def split_all(dataset: FusedDataset, seed) -> list[UserSplit]:
    """One split per roster user; per-user seed is ``seed ^ stable_hash(user)``."""
    return [build_user_split(dataset, u, derive_seed(seed, u)) for u in dataset.roster]


def write_manifest(splits) -> str:
    lines = ["target,phase,index"]
    for split in splits:
        lines += split.manifest_lines()
    return "\n".join(lines) + "\n"
