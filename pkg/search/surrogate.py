"""
Surrogate Models for Pair Scout
Heteroscedastic mean/variance network, MC-dropout teacher and student for epistemic uncertainty
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from config import SURROGATE_CONFIG

torch.set_default_dtype(torch.float64)


class SearchError(Exception):
    """Base error for the search package"""


class SurrogateParameterError(SearchError, ValueError):
    """Invalid argument to a surrogate operation"""


@dataclass
class Corpus:
    """Evaluated pairs: embedding x and observed performance o in [0, 1]"""
    xs: List[np.ndarray] = field(default_factory=list)
    ys: List[float] = field(default_factory=list)

    def add(self, x: Sequence[float], o: float) -> None:
        if not 0.0 <= o <= 1.0:
            raise SurrogateParameterError(f"Observed performance {o} outside [0, 1]")
        self.xs.append(np.asarray(x, dtype=float))
        self.ys.append(float(o))

    def __len__(self) -> int:
        return len(self.ys)

    def tensors(self) -> Tuple[torch.Tensor, torch.Tensor]:
        return torch.as_tensor(np.stack(self.xs)), torch.as_tensor(self.ys)


def _mlp(in_dim: int, widths: Sequence[int]) -> Tuple[nn.Sequential, int]:
    layers: List[nn.Module] = []
    for width in widths:
        layers += [nn.Linear(in_dim, width), nn.SiLU()]
        in_dim = width
    return nn.Sequential(*layers), in_dim


class BranchNet(nn.Module):
    """Separate CNN and accelerator trunks merged into a joint head; optional dropout before the output layer"""

    def __init__(self, cnn_dim: int, accel_dim: int, branch_widths: Sequence[int], head_widths: Sequence[int],
                 outputs: int, dropout: float = 0.0):
        super().__init__()
        if not 0.0 <= dropout < 1.0:
            raise SurrogateParameterError(f"Dropout must lie in [0, 1), got {dropout}")
        self.cnn_dim = cnn_dim
        self.cnn_branch, cnn_out = _mlp(cnn_dim, branch_widths)
        self.accel_branch, accel_out = _mlp(accel_dim, branch_widths)
        self.joint, joint_out = _mlp(cnn_out + accel_out, head_widths)
        self.out = nn.Linear(joint_out, outputs)
        self.dropout = dropout

    def forward(self, x: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        hidden = self.joint(torch.cat([self.cnn_branch(x[..., :self.cnn_dim]),
                                       self.accel_branch(x[..., self.cnn_dim:])], dim=-1))
        if generator is not None and self.dropout > 0.0:
            keep = 1.0 - self.dropout
            hidden = hidden * torch.bernoulli(torch.full_like(hidden, keep), generator=generator) / keep
        return self.out(hidden)


class SurrogateStack:
    """
    Three networks sharing one input layout.

    f predicts (mu, log variance) and is trained with the Gaussian negative log likelihood.
    g is the MC-dropout teacher; h is the student regressing the teacher's sample spread.
    """

    def __init__(self, cnn_dim: int, accel_dim: int = 13, config: Optional[Dict] = None, seed: int = 0,
                 heteroscedastic: bool = True):
        self.logger = logging.getLogger(__name__)
        self.config = {**SURROGATE_CONFIG, **(config or {})}
        self.cnn_dim = cnn_dim
        self.accel_dim = accel_dim
        self.seed = seed
        self.heteroscedastic = heteroscedastic
        self.losses: Dict[str, List[float]] = {"npn": [], "teacher": [], "student": []}
        cfg = self.config
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.npn = BranchNet(cnn_dim, accel_dim, cfg["branch_widths"], cfg["head_widths"], 2)
            self.teacher = BranchNet(cnn_dim, accel_dim, cfg["branch_widths"], cfg["head_widths"], 1, cfg["dropout"])
            self.student = BranchNet(cnn_dim, accel_dim, cfg["branch_widths"], cfg["head_widths"], 1)

    @property
    def input_dim(self) -> int:
        return self.cnn_dim + self.accel_dim

    def _as_batch(self, x) -> torch.Tensor:
        x = torch.as_tensor(x, dtype=torch.float64)
        return x.unsqueeze(0) if x.dim() == 1 else x

    def npn_forward(self, x) -> Tuple[torch.Tensor, torch.Tensor]:
        """(mu, sigma) per row; sigma is floored so it stays positive"""
        out = self.npn(self._as_batch(x))
        variance = torch.exp(out[..., 1]) + self.config["variance_floor"]
        return out[..., 0], torch.sqrt(variance)

    def student_forward(self, x) -> torch.Tensor:
        return nn.functional.softplus(self.student(self._as_batch(x))[..., 0])

    def teacher_samples(self, x, n: int, seed: Optional[int] = None) -> torch.Tensor:
        generator = torch.Generator().manual_seed(self.seed if seed is None else seed)
        batch = self._as_batch(x)
        with torch.no_grad():
            return torch.stack([self.teacher(batch, generator)[..., 0] for _ in range(n)])

    def epistemic(self, x, n: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(xi, xi_hat): teacher MC-dropout spread and the student's prediction of it"""
        n = self.config["mc_samples"] if n is None else n
        if n < 2:
            raise SurrogateParameterError(f"Need at least 2 dropout samples, got {n}")
        xi = self.teacher_samples(x, n).std(dim=0)
        with torch.no_grad():
            xi_hat = self.student_forward(x)
        return xi.numpy(), xi_hat.numpy()

    def _train(self, net: nn.Module, loss_fn, epochs: int) -> List[float]:
        optimizer = torch.optim.Adam(net.parameters(), lr=self.config["learning_rate"])
        history = []
        for _ in range(epochs):
            optimizer.zero_grad()
            loss = loss_fn()
            loss.backward()
            optimizer.step()
            history.append(loss.item())
        return history

    def fit(self, corpus: Corpus, epochs: Optional[int] = None) -> Dict[str, float]:
        """Train f, then g, then h on the corpus; returns each network's final loss"""
        if len(corpus) == 0:
            raise SurrogateParameterError("Cannot fit on an empty corpus")
        epochs = self.config["epochs"] if epochs is None else epochs
        x, o = corpus.tensors()
        floor = self.config["variance_floor"]

        def npn_loss():
            out = self.npn(x)
            if not self.heteroscedastic:
                return ((out[..., 0] - o) ** 2).mean()
            variance = torch.exp(out[..., 1]) + floor
            return ((out[..., 0] - o) ** 2 / (2.0 * variance) + 0.5 * torch.log(variance)).mean()

        self.losses["npn"] = self._train(self.npn, npn_loss, epochs)

        generator = torch.Generator().manual_seed(self.seed + 1)
        self._train(self.teacher, lambda: ((self.teacher(x, generator)[..., 0] - o) ** 2).mean(), epochs)
        with torch.no_grad():
            self.losses["teacher"] = [((self.teacher(x)[..., 0] - o) ** 2).mean().item()]

        xi = self.teacher_samples(x, self.config["mc_samples"]).std(dim=0)
        self.losses["student"] = self._train(self.student, lambda: ((self.student_forward(x) - xi) ** 2).mean(), epochs)

        final = {name: history[-1] for name, history in self.losses.items()}
        self.logger.debug(f"Surrogate fit on {len(corpus)} points: " +
                          ", ".join(f"{k}={v:.4g}" for k, v in final.items()))
        return final

    def ucb_tensor(self, x: torch.Tensor, k1: Optional[float] = None, k2: Optional[float] = None) -> torch.Tensor:
        """Differentiable mu + k1*sigma + k2*xi_hat; sigma drops out in homoscedastic mode"""
        k1 = self.config["k1"] if k1 is None else k1
        k2 = self.config["k2"] if k2 is None else k2
        mu, sigma = self.npn_forward(x)
        value = mu + k2 * self.student_forward(x)
        if self.heteroscedastic:
            value = value + k1 * sigma
        return value

    def ucb(self, x, k1: Optional[float] = None, k2: Optional[float] = None) -> np.ndarray:
        with torch.no_grad():
            return self.ucb_tensor(self._as_batch(x), k1, k2).numpy()

    def uncertainty(self, x, k1: Optional[float] = None, k2: Optional[float] = None) -> np.ndarray:
        """k1*sigma + k2*xi_hat, the uncertainty-sampling score"""
        k1 = self.config["k1"] if k1 is None else k1
        k2 = self.config["k2"] if k2 is None else k2
        with torch.no_grad():
            _, sigma = self.npn_forward(x)
            score = k2 * self.student_forward(x)
            if self.heteroscedastic:
                score = score + k1 * sigma
        return score.numpy()

    def save(self, path: str) -> None:
        data = {
            "architecture": {
                "cnn_dim": self.cnn_dim, "accel_dim": self.accel_dim,
                "branch_widths": list(self.config["branch_widths"]), "head_widths": list(self.config["head_widths"]),
                "dropout": self.teacher.dropout, "dropout_placement": "before teacher output layer",
                "heteroscedastic": self.heteroscedastic,
            },
            "config": {k: v for k, v in self.config.items() if not isinstance(v, (list, tuple))},
            "seed": self.seed,
            "weights": {name: {k: v.tolist() for k, v in getattr(self, name).state_dict().items()}
                        for name in ("npn", "teacher", "student")},
        }
        with open(path, "w") as f:
            json.dump(data, f)

    @classmethod
    def load(cls, path: str) -> "SurrogateStack":
        with open(path, "r") as f:
            data = json.load(f)
        arch = data["architecture"]
        config = {**data.get("config", {}), "branch_widths": arch["branch_widths"],
                  "head_widths": arch["head_widths"], "dropout": arch["dropout"]}
        stack = cls(arch["cnn_dim"], arch["accel_dim"], config, data["seed"], arch["heteroscedastic"])
        for name, weights in data["weights"].items():
            getattr(stack, name).load_state_dict({k: torch.as_tensor(v) for k, v in weights.items()})
        return stack
