from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    margin_similar: float = 0.1
    margin_different: float = 0.3
    hidden: int = 32
    reduced_dim: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.hidden < 0:
            raise ConfigError("hidden must be >= 0")
        if self.reduced_dim < 1:
            raise ConfigError("reduced_dim must be >= 1")
        if not 0 <= self.margin_similar < self.margin_different:
            raise ConfigError("margins must satisfy 0 <= margin_similar < margin_different")

    def to_dict(self):
        return asdict(self)
