"""Two-hidden-layer SELU regressor from attribute probabilities to a quality score."""

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator
from torch import Tensor, nn

from attriqa.diffcore import ops
from attriqa.diffcore.params import ParamGroup
from attriqa.errors import ShapeError


class RegressorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(ge=1)
    hidden: tuple[int, int] = (128, 64)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    init_seed: int = 0

    @field_validator("hidden")
    @classmethod
    def _positive(cls, v):
        if min(v) < 1:
            raise ValueError("hidden sizes must be positive")
        return v


class QualityRegressor(nn.Module):
    def __init__(self, config: RegressorConfig):
        super().__init__()
        self.config = config
        sizes = [config.input_dim, *config.hidden, 1]
        gen = torch.Generator().manual_seed(config.init_seed)
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            # LeCun normal, the SELU self-normalizing init
            w = torch.randn(fan_out, fan_in, generator=gen, dtype=torch.float64) / fan_in**0.5
            self.weights.append(nn.Parameter(w))
            self.biases.append(nn.Parameter(torch.zeros(fan_out, dtype=torch.float64)))

    def forward(self, x: Tensor, generator: torch.Generator | None = None) -> Tensor:
        if x.shape[-1] != self.config.input_dim:
            raise ShapeError("regressor input width", x.shape, (self.config.input_dim,))
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ops.linear(h, w, b)
            if i < last:
                h = ops.dropout(ops.selu(h), self.config.dropout, self.training, generator)
        return h.squeeze(-1)

    def start_from_constant(self, value: float):
        """Zero the output layer so the untrained model predicts `value` for every input."""
        with torch.no_grad():
            self.weights[-1].zero_()
            self.biases[-1].fill_(value)

    def param_group(self) -> ParamGroup:
        params = {f"w{i}": w for i, w in enumerate(self.weights)}
        params.update({f"b{i}": b for i, b in enumerate(self.biases)})
        return ParamGroup("regressor", params, trainable=True)


def predict_score(x, model: QualityRegressor) -> tuple[Tensor, Tensor]:
    """(clamped score in [0, 1], raw linear output) in eval mode."""
    x = torch.as_tensor(x, dtype=torch.float64)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        raw = model(x)
    model.train(was_training)
    return raw.clamp(0.0, 1.0), raw
