from dataclasses import dataclass, asdict
from typing import Optional, Dict, Any

RUN_STATES = ("started", "running", "succeeded", "failed")


@dataclass
class RunStatus:
    """
    Progress of one experiment run, mirrored into status.json.
    """

    state: str
    progress: int = 0
    message: Optional[str] = None
    extra: Optional[Dict[str, Any]] = None
    run_id: Optional[str] = None
    experiment: Optional[str] = None

    def __post_init__(self) -> None:
        if self.state not in RUN_STATES:
            raise ValueError(f"Unknown run state {self.state!r}; expected one of {RUN_STATES}")

    @property
    def finished(self) -> bool:
        return self.state in ("succeeded", "failed")

    def advance(self, state: str, progress: int, message: Optional[str] = None) -> None:
        if state not in RUN_STATES:
            raise ValueError(f"Unknown run state {state!r}; expected one of {RUN_STATES}")
        if self.finished:
            raise ValueError(f"Run {self.run_id} already {self.state}")
        self.state = state
        self.progress = max(0, min(progress, 100))
        self.message = message

    def asdict(self) -> Dict[str, Any]:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}
