import os
from typing import Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, model_validator

# Load environment variables
load_dotenv()

DEFAULT_STATE_CAP = int(os.getenv("FAIRSTEP_STATE_CAP", "1000000"))
DEFAULT_HORIZON = int(os.getenv("FAIRSTEP_HORIZON")) if os.getenv("FAIRSTEP_HORIZON") else None
OUTPUT_DIR = os.getenv("FAIRSTEP_OUTPUT_DIR", "results")
WORKERS = int(os.getenv("FAIRSTEP_WORKERS", "4"))
LOG_LEVEL = os.getenv("FAIRSTEP_LOG_LEVEL", "WARNING")

SCHEDULER_POLICIES = ("rr", "aging", "script")
RANDOMIZED_POLICIES = ("aging",)


class RunConfig(BaseModel):
    """Validated settings for one CLI command."""

    command: str
    systems: Tuple[str, ...] = ()
    keys: int = Field(default=2, ge=1, le=26)
    depth: Optional[int] = Field(default=None, ge=0)
    state_cap: int = Field(default=DEFAULT_STATE_CAP, ge=1)
    canon: bool = False
    sched: Literal["rr", "aging", "script"] = "rr"
    bound: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    steps: int = Field(default=0, ge=0)
    horizon: Optional[int] = Field(default=DEFAULT_HORIZON, ge=1)
    script: Optional[str] = None
    output_dir: str = OUTPUT_DIR
    out: Optional[str] = None
    report_format: Literal["text", "structured"] = "text"

    @model_validator(mode="after")
    def check_scheduler(self) -> "RunConfig":
        if self.sched in RANDOMIZED_POLICIES and self.seed is None:
            raise ValueError(f"--seed is required for the '{self.sched}' scheduler")
        if self.sched == "aging" and self.bound is not None and self.bound < self.keys:
            raise ValueError(f"aging bound {self.bound} is smaller than the key count {self.keys}")
        if self.sched == "script" and not self.script:
            raise ValueError("the 'script' scheduler needs --script")
        return self
