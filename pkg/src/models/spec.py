from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.constants import FIXED_SEGMENT_LENGTH, EMBEDDING_SIZE, ModelFamily
from src.core.exceptions import InvalidSpecError

UNET_FAMILIES = (ModelFamily.UNET1D, ModelFamily.UNET2D)
TIME_GENERATORS = (ModelFamily.UNET1D, ModelFamily.GATED_DILATED_STACK)
TF_GENERATORS = (ModelFamily.UNET2D, ModelFamily.CASNET)
DISCRIMINATORS = (ModelFamily.DISC1D, ModelFamily.DISC2D)

CASNET_ARITY = 3


def default_dilations(cycles: int = 2, max_dilation: int = 512) -> List[int]:
    cycle = []
    dilation = 1
    while dilation <= max_dilation:
        cycle.append(dilation)
        dilation *= 2
    return cycle * cycles


class ModelSpec(BaseModel):
    """
    Architecture description of a generator or discriminator.

    ``depth`` is the layer count of a U-net (encoder plus decoder) or of a discriminator (its K
    feature layers); for the gated stack it is the number of residual blocks and follows the
    dilation schedule. ``sub_specs`` holds the chained U-nets of a CasNet.
    """

    model_config = ConfigDict(use_enum_values=False, extra="forbid")

    family: ModelFamily
    depth: int = 0
    base_channels: int = 16
    max_channels: int = 256
    kernel_size: int = 0
    dilation_schedule: Optional[List[int]] = None
    sub_specs: Optional[List["ModelSpec"]] = None
    input_length: int = FIXED_SEGMENT_LENGTH
    bypass_activations: bool = False

    @property
    def receptive_field(self) -> Optional[int]:
        """1 + sum((kernel - 1) * dilation) over the residual blocks of a gated stack."""
        if self.family != ModelFamily.GATED_DILATED_STACK or not self.dilation_schedule:
            return None
        return 1 + sum((self.kernel_size - 1) * d for d in self.dilation_schedule)

    @property
    def domain(self) -> str:
        if self.family in (ModelFamily.UNET1D, ModelFamily.GATED_DILATED_STACK, ModelFamily.DISC1D):
            return "time"
        return "tf"

    def check(self) -> "ModelSpec":
        """
        Validates the family invariants.

        :raise: InvalidSpecError: On odd U-net depth, wrong CasNet arity or a bad dilation schedule
        """
        if self.base_channels < 1 or self.max_channels < self.base_channels:
            raise InvalidSpecError(
                f"Channel settings base={self.base_channels} max={self.max_channels} are invalid"
            )
        if self.family in UNET_FAMILIES:
            if self.depth < 2 or self.depth % 2:
                raise InvalidSpecError(
                    f"{self.family.value} depth must be an even number >= 2, got {self.depth}"
                )
            if self.family == ModelFamily.UNET2D and 2 ** (self.depth // 2) > EMBEDDING_SIZE:
                raise InvalidSpecError(
                    f"unet2d depth {self.depth} downsamples a {EMBEDDING_SIZE}x{EMBEDDING_SIZE} "
                    f"embedding below one pixel"
                )
            if self.family == ModelFamily.UNET1D and 2 ** (self.depth // 2) > self.input_length:
                raise InvalidSpecError(
                    f"unet1d depth {self.depth} too deep for {self.input_length} samples"
                )
            # Stride-2 layers halve exactly with an odd 1-D or an even 2-D kernel.
            if self.kernel_size % 2 != (1 if self.family == ModelFamily.UNET1D else 0):
                raise InvalidSpecError(
                    f"{self.family.value} kernel size {self.kernel_size} has the wrong parity"
                )
        elif self.family == ModelFamily.CASNET:
            if not self.sub_specs or len(self.sub_specs) != CASNET_ARITY:
                raise InvalidSpecError(
                    f"casnet chains exactly {CASNET_ARITY} U-nets, got "
                    f"{len(self.sub_specs or [])}"
                )
            for sub_spec in self.sub_specs:
                if sub_spec.family != ModelFamily.UNET2D:
                    raise InvalidSpecError(
                        f"casnet stages must be unet2d, got {sub_spec.family.value}"
                    )
                sub_spec.check()
        elif self.family == ModelFamily.GATED_DILATED_STACK:
            self._check_dilations()
            if self.kernel_size < 1 or self.kernel_size % 2 == 0:
                raise InvalidSpecError(
                    "gated stack kernel size must be odd for symmetric padding"
                )
        elif self.family in DISCRIMINATORS:
            if self.depth < 1:
                raise InvalidSpecError("discriminator needs at least one feature layer")
        if self.kernel_size < 1:
            raise InvalidSpecError(f"kernel size must be positive, got {self.kernel_size}")
        return self

    def _check_dilations(self):
        schedule = self.dilation_schedule
        if not schedule:
            raise InvalidSpecError("gated stack needs a dilation schedule")
        previous = None
        for dilation in schedule:
            if dilation < 1 or dilation & (dilation - 1):
                raise InvalidSpecError(f"dilation {dilation} is not a power of two")
            # Each cycle grows exponentially, a new cycle restarts at 1.
            if previous is not None and dilation != 1 and dilation <= previous:
                raise InvalidSpecError(
                    f"dilation schedule {schedule} is not increasing within a cycle"
                )
            previous = dilation
        if self.depth not in (0, len(schedule)):
            raise InvalidSpecError(
                f"gated stack depth {self.depth} disagrees with {len(schedule)} dilations"
            )

    @classmethod
    def parse(cls, data: dict) -> "ModelSpec":
        """Builds and checks a spec from a JSON document, with family defaults filled in."""
        try:
            family = ModelFamily(data["family"])
        except (KeyError, ValueError) as ex:
            raise InvalidSpecError(f"Unknown or missing model family: {ex}")
        merged = default_spec(family).model_dump()
        merged.update(data)
        if family == ModelFamily.GATED_DILATED_STACK and "depth" not in data:
            merged["depth"] = len(merged.get("dilation_schedule") or [])
        try:
            return cls.model_validate(merged).check()
        except ValidationError as ex:
            raise InvalidSpecError(str(ex))


_FAMILY_DEFAULTS = {
    ModelFamily.UNET1D: dict(depth=10, kernel_size=31),
    ModelFamily.UNET2D: dict(depth=8, kernel_size=4),
    ModelFamily.GATED_DILATED_STACK: dict(kernel_size=3),
    ModelFamily.CASNET: dict(kernel_size=4),
    ModelFamily.DISC1D: dict(depth=5, kernel_size=31),
    ModelFamily.DISC2D: dict(depth=4, kernel_size=4),
}


def default_spec(family: ModelFamily | str, **overrides) -> ModelSpec:
    """Toy-scale defaults of every family."""
    family = ModelFamily(family) if isinstance(family, str) else family
    values = {**_FAMILY_DEFAULTS[family], **overrides}
    if family == ModelFamily.CASNET and "sub_specs" not in overrides:
        values["sub_specs"] = [default_spec(ModelFamily.UNET2D) for _ in range(CASNET_ARITY)]
    if family == ModelFamily.GATED_DILATED_STACK:
        values.setdefault("dilation_schedule", default_dilations())
        values.setdefault("depth", len(values["dilation_schedule"]))
    return ModelSpec(family=family, **values)
