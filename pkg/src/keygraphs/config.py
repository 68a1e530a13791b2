"""Run configuration shared by the library pipeline and the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .pose import RansacConfig


@dataclass
class Params:
    structure: str = "tri"
    min_dist: int = 10
    max_dist: int = 100
    profile_len: int = 30
    coeffs: int = 3
    blur_sigma: float = 1.0
    threshold: float = 0.5
    vertex_threshold: float | None = None
    max_corners: int = 1000
    quality: float = 0.01
    # keypoints kept in the scene after min-distance sampling; None = all
    scene_max_keypoints: int | None = 500
    model_max_graphs: int | None = None
    # kd-tree search slack; 0 means exact radius queries
    index_eps: float = 0.0
    seed: int = 0
    ransac: RansacConfig = field(default_factory=RansacConfig)

    def __post_init__(self):
        if isinstance(self.ransac, dict):
            self.ransac = RansacConfig(**self.ransac)
        if self.min_dist < 1:
            raise ValueError("min_dist must be >= 1")
        if self.min_dist > self.max_dist:
            raise ValueError("min_dist must not exceed max_dist")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if not 1 <= self.coeffs < self.profile_len / 2:
            raise ValueError("need 1 <= coeffs < profile_len / 2")

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
