"""Per-decode step records shared by autoregressive and speculative decoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class StepKind(str, enum.Enum):
    DRAFT = "DRAFT_STEP"
    AR = "AR_STEP"


@dataclass(frozen=True)
class StepRecord:
    """One forward pass of the main model.

    ``proposed`` counts draft tokens over every candidate verified in the step;
    ``winner_proposed`` is the length of the winning candidate alone. Tokens
    appended to the output are ``accepted`` plus ``emitted`` (0 or 1) tokens
    taken from the model itself.
    """

    kind: StepKind
    proposed: int = 0
    accepted: int = 0
    candidate_index: int | None = None
    batch_size: int = 1
    n_candidates: int = 0
    winner_proposed: int = 0
    emitted: int = 1

    @classmethod
    def ar(cls) -> "StepRecord":
        return cls(StepKind.AR)

    @property
    def new_tokens(self) -> int:
        return self.accepted + self.emitted


@dataclass
class DecodeTrace:
    prompt_len: int
    steps: list[StepRecord] = field(default_factory=list)
    output: list[int] = field(default_factory=list)

    @property
    def forward_passes(self) -> int:
        return len(self.steps)

    @property
    def generated(self) -> list[int]:
        return self.output[self.prompt_len:]

    @property
    def draft_steps(self) -> list[StepRecord]:
        return [s for s in self.steps if s.kind is StepKind.DRAFT]

    @property
    def proposed(self) -> int:
        return sum(s.proposed for s in self.steps)

    @property
    def accepted(self) -> int:
        return sum(s.accepted for s in self.steps)

    def check(self) -> None:
        """Raise AssertionError if the record is internally inconsistent."""
        for s in self.steps:
            assert 0 <= s.accepted <= s.proposed, s
            if s.kind is StepKind.DRAFT:
                assert s.batch_size == s.proposed + 1, s
                assert s.candidate_index is not None and 0 <= s.candidate_index < s.n_candidates, s
                assert s.accepted <= s.winner_proposed <= s.proposed, s
            else:
                assert s.batch_size == 1 and s.proposed == 0 and s.candidate_index is None, s
                assert s.emitted == 1, s
        assert sum(s.new_tokens for s in self.steps) == len(self.output) - self.prompt_len
