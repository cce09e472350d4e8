import hashlib
import random
from enum import Enum
from typing import Any, Type

import numpy as np
import torch


def get_enum_from_value(value: Any, enum_class: Type[Enum]) -> Enum:
    """
    Function that given the value of an enum object and the enum class. It gets you the actual enum object
    :param value: Value that wants to get matched against an enum class (an enum member is returned as is)
    :param enum_class: Enum class

    :return: Enum. The Enum object
    """
    if isinstance(value, enum_class):
        return value
    for member in enum_class:
        if member.value == value:
            return member
    raise ValueError(f"No matching enum for value: {value}")


def derive_seed(seed: int, *labels: Any) -> int:
    """
    Derives a child seed from a parent seed and labels, stable across processes and platforms.
    Workers use it so results never depend on completion order.
    """
    digest = hashlib.sha256(
        ":".join([str(seed), *map(str, labels)]).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:4], "little")


def seed_everything(seed: int) -> None:
    """Seeds python, numpy and torch global generators."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
