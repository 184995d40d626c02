"""Plain-value check reports shared by the verification routines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CheckReport:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)

    def render(self) -> str:
        out = [f"check '{self.name}': {'PASS' if self.passed else 'FAIL'}"]
        out += [f"  {line}" for line in self.lines]
        for key, value in self.metrics.items():
            out.append(f"  {key} = {value:.6e}")
        return "\n".join(out)
