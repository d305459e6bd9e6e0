"""Classifier architectures producing k logits for a (channels, side, side) stamp.

wrn_10_4 is the depth-10, widen-factor-4 wide residual network: 7 convolutions
(an input conv plus two per residual block) in three single-block groups, 3
residual connections, batch normalization (decay 0.9, eps 1e-5), global
average pooling and a k-way linear head. compact_cnn is a small three-conv net
for desk-scale runs; linear_softmax is a single linear map over flattened
pixels for fast property tests.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

architectureNames = ('wrn_10_4', 'compact_cnn', 'linear_softmax')

# torch momentum is the weight of the new batch statistic, i.e. 1 - decay.
batchNormMomentum = 0.1
batchNormEpsilon = 1e-5


class WideBasicBlock(nn.Module):
    """Pre-activation residual block: BN-ReLU-conv3x3-BN-ReLU-conv3x3 plus shortcut."""

    def __init__(self, inPlanes: int, outPlanes: int, stride: int) -> None:
        super().__init__()
        self.bn1 = nn.BatchNorm2d(inPlanes, momentum=batchNormMomentum, eps=batchNormEpsilon)
        self.conv1 = nn.Conv2d(inPlanes, outPlanes, kernel_size=3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(outPlanes, momentum=batchNormMomentum, eps=batchNormEpsilon)
        self.conv2 = nn.Conv2d(outPlanes, outPlanes, kernel_size=3, stride=1, padding=1, bias=False)

        self.shortcut = None
        if stride != 1 or inPlanes != outPlanes:
            self.shortcut = nn.Conv2d(inPlanes, outPlanes, kernel_size=1, stride=stride, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        activated = F.relu(self.bn1(x))
        residual = x if self.shortcut is None else self.shortcut(activated)
        out = self.conv1(activated)
        out = self.conv2(F.relu(self.bn2(out)))
        return out + residual


class WideResNet(nn.Module):
    def __init__(self, inChannels: int, nClasses: int, *, depth: int = 10, widenFactor: int = 4) -> None:
        super().__init__()
        if (depth - 4) % 6 != 0:
            raise ValueError(f'Wide ResNet depth must be 6n + 4, got {depth}')
        blocksPerGroup = (depth - 4) // 6
        widths = [16, 16 * widenFactor, 32 * widenFactor, 64 * widenFactor]

        self.conv1 = nn.Conv2d(inChannels, widths[0], kernel_size=3, padding=1, bias=False)
        self.group1 = self._makeGroup(widths[0], widths[1], blocksPerGroup, stride=1)
        self.group2 = self._makeGroup(widths[1], widths[2], blocksPerGroup, stride=2)
        self.group3 = self._makeGroup(widths[2], widths[3], blocksPerGroup, stride=2)
        self.bn = nn.BatchNorm2d(widths[3], momentum=batchNormMomentum, eps=batchNormEpsilon)
        self.pool = nn.AdaptiveAvgPool2d((1, 1))
        self.fc = nn.Linear(widths[3], nClasses)

    @staticmethod
    def _makeGroup(inPlanes: int, outPlanes: int, blocks: int, stride: int) -> nn.Sequential:
        layers = [WideBasicBlock(inPlanes, outPlanes, stride)]
        layers.extend(WideBasicBlock(outPlanes, outPlanes, 1) for _ in range(blocks - 1))
        return nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.conv1(x)
        out = self.group3(self.group2(self.group1(out)))
        out = F.relu(self.bn(out))
        out = torch.flatten(self.pool(out), 1)
        return self.fc(out)


class CompactCnn(nn.Module):
    # SiLU keeps the loss smooth, so finite-difference gradient checks hold everywhere.
    def __init__(self, inChannels: int, nClasses: int) -> None:
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(inChannels, 32, kernel_size=3, padding=1),
            nn.SiLU(),
            nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(64, 64, kernel_size=3, stride=2, padding=1),
            nn.SiLU(),
        )
        self.pool = nn.AdaptiveAvgPool2d((1, 1))
        self.fc = nn.Linear(64, nClasses)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(torch.flatten(self.pool(self.features(x)), 1))


class LinearSoftmax(nn.Module):
    def __init__(self, inputShape: tuple[int, int, int], nClasses: int) -> None:
        super().__init__()
        self.fc = nn.Linear(math.prod(inputShape), nClasses)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(torch.flatten(x, 1))


def initializeWeights(network: nn.Module) -> None:
    """Fan-in scaled normal weights, zero biases; draws from the global torch RNG."""
    for module in network.modules():
        if isinstance(module, (nn.Conv2d, nn.Linear)):
            fanIn = module.weight[0].numel()
            gain = 1.0 if isinstance(module, nn.Linear) else 2.0
            with torch.no_grad():
                module.weight.normal_(0.0, math.sqrt(gain / fanIn))
                if module.bias is not None:
                    module.bias.zero_()


def buildArchitecture(name: str, inputShape: tuple[int, int, int], nClasses: int) -> nn.Module:
    channels = inputShape[0]
    if name == 'wrn_10_4':
        network = WideResNet(channels, nClasses, depth=10, widenFactor=4)
    elif name == 'compact_cnn':
        network = CompactCnn(channels, nClasses)
    elif name == 'linear_softmax':
        network = LinearSoftmax(tuple(inputShape), nClasses)
    else:
        raise ValueError(f'Unknown architecture {name!r}; valid architectures: {architectureNames}')
    initializeWeights(network)
    return network
