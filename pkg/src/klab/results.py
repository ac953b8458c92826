from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    method: str  # "adaptive_quadrature" or "monte_carlo"
    samples_or_evals: int
    converged: bool = True
    flag: str = ""

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be >= 0")

    def __add__(self, other):
        return IntegralResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.method if self.method == other.method else "mixed",
            self.samples_or_evals + other.samples_or_evals,
            self.converged and other.converged,
            "; ".join(f for f in (self.flag, other.flag) if f),
        )

    def scaled(self, c):
        return IntegralResult(c * self.value, abs(c) * self.error_estimate, self.method,
                              self.samples_or_evals, self.converged, self.flag)

    def as_dict(self):
        out = asdict(self)
        if isinstance(self.value, complex):
            out["value"] = [self.value.real, self.value.imag]
        return out
