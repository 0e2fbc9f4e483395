"""Model-guided unrolled network for limited-angle reconstruction.

Each of the ``n_iter`` blocks runs two residual CNNs and a physics
consistency update:

* a spectrum block that refines the 2-D Fourier transform of the current
  image's full-view sinogram (real and imaginary parts are stacked along
  the batch axis so one shared-weight CNN processes both),
* an image block that refines the current image in the spatial domain,
* a merge layer that combines the previous image, the FBP of the
  zero-padded measured-data residual, the FBP of the completed-sinogram
  residual, and the refined image with four learned scalars shared across
  blocks.

Block CNN weights are independent per block; the merge scalars are a
single shared storage location.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytic import RAM_LAK, FilterSpec
from .data import Sample, psnr
from .errors import DivergedError, InvalidArgumentError
from .geometry import ViewSelection
from .nn import (
    AdamState,
    BnParams,
    ConvParams,
    Tensor,
    adam_step,
    backward,
    batchnorm,
    concat,
    conv2d,
    fbp_layer,
    fft2,
    ifft2,
    load_checkpoint,
    mul,
    narrow,
    pad_layer,
    project_layer,
    relu,
    restrict_layer,
    save_checkpoint,
    sub,
    sum_all,
)
from .projector import Geometry

_FEATURES = 64
_KERNEL = 5


@dataclass
class ResBlockParams:
    """Four 5x5 conv layers (1->64, 64->64, 64->64, 64->1) with batch
    normalization on layers 2-4."""

    conv1: ConvParams
    conv2: ConvParams
    conv3: ConvParams
    conv4: ConvParams
    bn2: BnParams
    bn3: BnParams
    bn4: BnParams

    @classmethod
    def initialize(cls, rng, dtype=np.float32, name=""):
        k, c = _KERNEL, _FEATURES
        return cls(
            conv1=ConvParams.initialize(k, k, 1, c, rng, dtype, f"{name}.conv1"),
            conv2=ConvParams.initialize(k, k, c, c, rng, dtype, f"{name}.conv2"),
            conv3=ConvParams.initialize(k, k, c, c, rng, dtype, f"{name}.conv3"),
            conv4=ConvParams.initialize(k, k, c, 1, rng, dtype, f"{name}.conv4"),
            bn2=BnParams.initialize(c, dtype, f"{name}.bn2"),
            bn3=BnParams.initialize(c, dtype, f"{name}.bn3"),
            bn4=BnParams.initialize(1, dtype, f"{name}.bn4"),
        )

    def parameters(self) -> list[Tensor]:
        out = []
        for conv in (self.conv1, self.conv2, self.conv3, self.conv4):
            out += [conv.filters, conv.biases]
        for bn in (self.bn2, self.bn3, self.bn4):
            out += [bn.scale, bn.offset]
        return out

    def buffers(self, name: str) -> list[tuple[str, np.ndarray]]:
        out = []
        for tag, bn in (("bn2", self.bn2), ("bn3", self.bn3), ("bn4", self.bn4)):
            out.append((f"{name}.{tag}.running_mean", bn.running_mean))
            out.append((f"{name}.{tag}.running_var", bn.running_var))
        return out


@dataclass
class MergeParams:
    """Learned scalars weighting the four merge terms; one storage location
    shared by every block."""

    w_prev: Tensor
    w_data: Tensor
    w_spectrum: Tensor
    w_refined: Tensor

    @classmethod
    def initialize(cls, dtype=np.float32):
        def scalar(v, name):
            return Tensor(np.asarray(v, dtype=dtype), requires_grad=True, name=name)

        return cls(
            w_prev=scalar(1.0, "merge.w_prev"),
            w_data=scalar(0.1, "merge.w_data"),
            w_spectrum=scalar(0.1, "merge.w_spectrum"),
            w_refined=scalar(0.1, "merge.w_refined"),
        )

    def parameters(self) -> list[Tensor]:
        return [self.w_prev, self.w_data, self.w_spectrum, self.w_refined]


@dataclass
class LossSpec:
    """Balance between the image-domain and spectrum-domain terms."""

    balance: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.balance <= 1.0):
            raise InvalidArgumentError("balance must lie in [0, 1]")


@dataclass
class MgnModel:
    geom: Geometry
    sel: ViewSelection
    n_iter: int
    spectrum_blocks: list[ResBlockParams]
    image_blocks: list[ResBlockParams]
    merge: MergeParams
    filt: FilterSpec = RAM_LAK

    def __post_init__(self):
        if self.n_iter < 1:
            raise InvalidArgumentError("n_iter must be >= 1")
        if len(self.spectrum_blocks) != self.n_iter or len(self.image_blocks) != self.n_iter:
            raise InvalidArgumentError("need one spectrum and one image block per iteration")

    @classmethod
    def initialize(cls, geom, sel, n_iter, seed=0, dtype=np.float32, filt=RAM_LAK):
        rng = np.random.default_rng(seed)
        spectrum = [
            ResBlockParams.initialize(rng, dtype, f"spectrum_block{n}") for n in range(n_iter)
        ]
        image = [ResBlockParams.initialize(rng, dtype, f"image_block{n}") for n in range(n_iter)]
        return cls(
            geom=geom,
            sel=sel,
            n_iter=n_iter,
            spectrum_blocks=spectrum,
            image_blocks=image,
            merge=MergeParams.initialize(dtype),
            filt=filt,
        )

    def parameters(self) -> list[Tensor]:
        out = []
        for n in range(self.n_iter):
            out += self.spectrum_blocks[n].parameters()
            out += self.image_blocks[n].parameters()
        out += self.merge.parameters()
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def named_state(self) -> list[tuple[str, np.ndarray]]:
        """Parameters plus batch-norm running statistics, in a fixed order."""
        out = [(p.name, p.values) for p in self.parameters()]
        for n in range(self.n_iter):
            out += self.spectrum_blocks[n].buffers(f"spectrum_block{n}")
            out += self.image_blocks[n].buffers(f"image_block{n}")
        return out

    def save(self, stem: str) -> None:
        save_checkpoint(stem, self.named_state())

    def load(self, stem: str) -> None:
        entries = dict(load_checkpoint(stem))
        for name, current in self.named_state():
            if name not in entries:
                raise InvalidArgumentError(f"checkpoint is missing {name}")
            arr = entries[name]
            if arr.shape != current.shape:
                raise InvalidArgumentError(
                    f"checkpoint entry {name} has shape {arr.shape}, expected {current.shape}"
                )
        lookup = {p.name: p for p in self.parameters()}
        for name, arr in entries.items():
            if name in lookup:
                lookup[name].values = arr.copy()
        for n in range(self.n_iter):
            for tag, bn in (
                (f"spectrum_block{n}.bn2", self.spectrum_blocks[n].bn2),
                (f"spectrum_block{n}.bn3", self.spectrum_blocks[n].bn3),
                (f"spectrum_block{n}.bn4", self.spectrum_blocks[n].bn4),
                (f"image_block{n}.bn2", self.image_blocks[n].bn2),
                (f"image_block{n}.bn3", self.image_blocks[n].bn3),
                (f"image_block{n}.bn4", self.image_blocks[n].bn4),
            ):
                bn.running_mean[...] = entries[f"{tag}.running_mean"]
                bn.running_var[...] = entries[f"{tag}.running_var"]

    @classmethod
    def from_checkpoint(cls, stem, geom, sel, filt=RAM_LAK):
        """Rebuild a model from a checkpoint; n_iter is inferred from the
        stored block names."""
        entries = load_checkpoint(stem)
        names = [n for n, _ in entries]
        n_iter = 1 + max(
            int(n.split(".")[0].removeprefix("spectrum_block"))
            for n in names
            if n.startswith("spectrum_block")
        )
        dtype = entries[0][1].dtype
        model = cls.initialize(geom, sel, n_iter, seed=0, dtype=dtype, filt=filt)
        model.load(stem)
        return model


def _res_block(x: Tensor, p: ResBlockParams, training: bool) -> Tensor:
    """conv+ReLU, then two conv+BN+ReLU, then conv+BN+ReLU down to one
    channel; the caller adds the skip connection."""
    h = relu(conv2d(x, p.conv1))
    h = relu(batchnorm(conv2d(h, p.conv2), p.bn2, training))
    h = relu(batchnorm(conv2d(h, p.conv3), p.bn3, training))
    h = relu(batchnorm(conv2d(h, p.conv4), p.bn4, training))
    return h


def sino_spectrum(sino: Tensor) -> Tensor:
    """Two-channel unitary FFT of a single-channel sinogram batch."""
    zeros = Tensor(np.zeros_like(sino.values))
    return fft2(concat([sino, zeros], axis=3))


def _spectrum_block_forward(sino: Tensor, p: ResBlockParams, training: bool) -> Tensor:
    spec_in = sino_spectrum(sino)
    n = spec_in.values.shape[0]
    stacked = concat(
        [narrow(spec_in, 3, 0, 1), narrow(spec_in, 3, 1, 1)], axis=0
    )
    res = _res_block(stacked, p, training)
    res_pair = concat([narrow(res, 0, 0, n), narrow(res, 0, n, n)], axis=3)
    return spec_in + res_pair


def spectrum_block_forward(
    u: Tensor, p: ResBlockParams, geom: Geometry, training: bool = False
) -> Tensor:
    """Refined full-view sinogram spectrum for the current image batch.

    The real and imaginary channels are stacked along the batch axis so a
    single weight set processes both, then unstacked; the block output is
    added to its input (residual skip), per channel.
    """
    return _spectrum_block_forward(project_layer(u, geom), p, training)


def image_block_forward(u: Tensor, p: ResBlockParams, training: bool = False) -> Tensor:
    """Spatial-domain refinement of the image batch (residual CNN)."""
    return u + _res_block(u, p, training)


def _merge(u, proj_u, refined, spectrum, measured, mp, geom, sel, filt):
    data_resid = pad_layer(sub(restrict_layer(proj_u, sel), measured), sel)
    data_term = fbp_layer(data_resid, geom, filt)
    completed = narrow(ifft2(spectrum), 3, 0, 1)
    spectrum_term = fbp_layer(sub(proj_u, completed), geom, filt)
    return (
        mul(u, mp.w_prev)
        + mul(data_term, mp.w_data)
        + mul(spectrum_term, mp.w_spectrum)
        + mul(refined, mp.w_refined)
    )


def merge_forward(
    u: Tensor,
    refined: Tensor,
    spectrum: Tensor,
    measured: Tensor,
    mp: MergeParams,
    geom: Geometry,
    sel: ViewSelection,
    filt: FilterSpec = RAM_LAK,
) -> Tensor:
    """Physics-consistency update combining the four information sources.

    u_next = w_prev * u
           + w_data * FBP(S*(S W u - measured))
           + w_spectrum * FBP(W u - Re(IFFT(spectrum)))
           + w_refined * refined
    """
    return _merge(
        u, project_layer(u, geom), refined, spectrum, measured, mp, geom, sel, filt
    )


def mgn_forward(
    measured: Tensor, u0: Tensor, model: MgnModel, training: bool = False
) -> tuple[Tensor, Tensor, Tensor]:
    """Unrolled forward pass.

    Parameters
    ----------
    measured : Tensor
        Limited-angle sinogram batch, (n, kept_views, detectors, 1).
    u0 : Tensor
        Initial image batch (conventionally the FBP of the zero-padded
        measurement), (n, height, width, 1).

    Returns
    -------
    (u_last, refined_last, spectrum_last)
        Final image, final image-block output, final spectrum-block output.
    """
    u = u0
    refined = spectrum = None
    for n in range(model.n_iter):
        proj_u = project_layer(u, model.geom)
        spectrum = _spectrum_block_forward(proj_u, model.spectrum_blocks[n], training)
        refined = image_block_forward(u, model.image_blocks[n], training)
        u = _merge(
            u, proj_u, refined, spectrum, measured, model.merge,
            model.geom, model.sel, model.filt,
        )
    return u, refined, spectrum


def mgn_loss(
    refined: Tensor,
    spectrum: Tensor,
    image_label: Tensor,
    sino_label: Tensor,
    spec: LossSpec = LossSpec(),
) -> Tensor:
    """Dual-domain squared error, averaged over the batch.

    The image-block output is compared with the image label and the
    spectrum-block output with the unitary FFT of the full-view sinogram
    label (two channels).
    """
    if refined.values.shape != image_label.values.shape:
        raise InvalidArgumentError("image term shapes disagree")
    n = refined.values.shape[0]
    target = sino_spectrum(sino_label)
    if spectrum.values.shape != target.values.shape:
        raise InvalidArgumentError("spectrum term shapes disagree")
    di = sub(refined, image_label)
    ds = sub(spectrum, target)
    image_term = mul(sum_all(mul(di, di)), 1.0 / n)
    spectrum_term = mul(sum_all(mul(ds, ds)), 1.0 / n)
    return mul(image_term, spec.balance) + mul(spectrum_term, 1.0 - spec.balance)


@dataclass
class TrainResult:
    model: MgnModel
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    val_psnr: float | None = None


def _batch_tensor(samples: list[Sample], attr: str, dtype) -> Tensor:
    arrs = [getattr(s, attr).values.astype(dtype)[None, :, :, None] for s in samples]
    return Tensor(np.concatenate(arrs, axis=0))


def train(
    model: MgnModel,
    samples: list[Sample],
    epochs: int,
    batch_size: int = 1,
    lr: float = 0.001,
    seed: int = 0,
    loss_spec: LossSpec = LossSpec(),
    val_samples: list[Sample] | None = None,
    max_steps: int | None = None,
    dtype=np.float32,
    log=None,
) -> TrainResult:
    """Adam training loop, bit-reproducible for a fixed seed.

    Shuffling is driven by ``seed`` alone; a non-finite loss aborts with
    the epoch/step position.  When ``val_samples`` is given, the mean
    validation PSNR of the final model (inference mode) is reported.
    """
    if not samples:
        raise InvalidArgumentError("training dataset is empty")
    rng = np.random.default_rng(seed)
    params = model.parameters()
    state = AdamState.for_params(params, lr=lr)
    result = TrainResult(model=model)
    steps = 0
    stop = False
    for epoch in range(epochs):
        order = rng.permutation(len(samples))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = [samples[i] for i in order[start : start + batch_size]]
            measured = _batch_tensor(batch, "limited", dtype)
            u0 = _batch_tensor(batch, "u0", dtype)
            image_label = _batch_tensor(batch, "image_label", dtype)
            sino_label = _batch_tensor(batch, "sino_label", dtype)
            _, refined, spectrum = mgn_forward(measured, u0, model, training=True)
            loss = mgn_loss(refined, spectrum, image_label, sino_label, loss_spec)
            value = float(loss.values)
            if not np.isfinite(value):
                raise DivergedError(
                    f"non-finite loss at epoch {epoch + 1} step {steps + 1}"
                )
            model.zero_grad()
            backward(loss)
            adam_step(params, [p.grad for p in params], state)
            result.step_losses.append(value)
            epoch_losses.append(value)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                stop = True
                break
        if epoch_losses:
            result.epoch_losses.append(float(np.mean(epoch_losses)))
        if log is not None and epoch_losses:
            log(f"epoch {epoch + 1}/{epochs} mean loss {result.epoch_losses[-1]:.6g}")
        if stop:
            break
    if val_samples:
        scores = [
            psnr(reconstruct(model, s, dtype=dtype), s.image_label.values)
            for s in val_samples
        ]
        result.val_psnr = float(np.mean(scores))
    return result


def reconstruct(model: MgnModel, sample: Sample, dtype=np.float32) -> np.ndarray:
    """Inference-mode reconstruction of one sample; returns the final image."""
    measured = _batch_tensor([sample], "limited", dtype)
    u0 = _batch_tensor([sample], "u0", dtype)
    u, _, _ = mgn_forward(measured, u0, model, training=False)
    return u.values[0, :, :, 0]
