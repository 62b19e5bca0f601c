from enum import Enum

from utils.errors import UsageError


class Strategy(str, Enum):
    """The three regression models compared for a baseline exposure."""

    ChangeScore = "change-score"
    FollowUpAdjusted = "adjusted"
    FollowUpUnadjusted = "unadjusted"

    @property
    def key(self) -> str:
        return self.value.replace("-", "_")

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def title(self) -> str:
        return self.label[0].upper() + self.label[1:]

    def formula(self, exposure: str, baseline: str, followup: str) -> str:
        if self is Strategy.ChangeScore:
            return f"{followup} - {baseline} ~ {exposure}"
        if self is Strategy.FollowUpAdjusted:
            return f"{followup} ~ {exposure} + {baseline}"
        return f"{followup} ~ {exposure}"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        token = text.strip().lower().replace("_", "-")
        for strategy in cls:
            if token in (strategy.value, strategy.name.lower()):
                return strategy
        raise UsageError(f"Unknown strategy: {text}", {"strategy": text})


_LABELS = {
    Strategy.ChangeScore: "change-score",
    Strategy.FollowUpAdjusted: "follow-up adjusted for baseline",
    Strategy.FollowUpUnadjusted: "follow-up unadjusted for baseline",
}
