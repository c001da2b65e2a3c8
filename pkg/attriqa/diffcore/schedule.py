import math

from pydantic import BaseModel, ConfigDict, Field, model_validator
from torch.optim import Optimizer
from torch.optim.lr_scheduler import LambdaLR


class Schedule(BaseModel):
    """Epoch count and cosine learning-rate schedule with linear warmup."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=100, ge=1)
    warmup_epochs: int = Field(default=20, ge=0)
    max_lr: float = Field(default=0.002, gt=0)
    min_lr: float = Field(default=0.0, ge=0)
    batch_size: int = Field(default=32, ge=1)
    weight_decay: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _warmup_fits(self):
        if self.warmup_epochs >= self.epochs and self.warmup_epochs > 0:
            raise ValueError("warmup_epochs must be smaller than epochs")
        return self

    def lr_at(self, epoch: int) -> float:
        if epoch < self.warmup_epochs:
            return self.max_lr * (epoch + 1) / self.warmup_epochs
        span = max(1, self.epochs - self.warmup_epochs)
        progress = (epoch - self.warmup_epochs) / span
        return self.min_lr + 0.5 * (self.max_lr - self.min_lr) * (1 + math.cos(math.pi * progress))

    def scheduler(self, optimizer: Optimizer) -> LambdaLR:
        """Per-epoch LambdaLR; the optimizer must be built with lr=max_lr."""
        return LambdaLR(optimizer, lambda epoch: self.lr_at(epoch) / self.max_lr)


# Prompt-tuning schedule and the full fine-tune schedule.
PROMPT_SCHEDULE = Schedule(epochs=100, warmup_epochs=20, max_lr=0.002)
FULL_SCHEDULE = Schedule(epochs=5, warmup_epochs=0, max_lr=5e-5)
REGRESSOR_SCHEDULE = Schedule(epochs=100, warmup_epochs=0, max_lr=1e-3)
