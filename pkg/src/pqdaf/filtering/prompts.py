from __future__ import annotations

from types import MappingProxyType
from typing import Mapping

from ..errors import ValidationError
from ..samples import CATEGORIES, Category, category

PROMPTS: Mapping[Category, str] = MappingProxyType({
    CATEGORIES[0]: "The driver is driving normally with both hands on the steering wheel.",
    CATEGORIES[1]: "The driver is texting with the right hand while driving.",
    CATEGORIES[2]: "The driver is holding a phone to the right ear while driving.",
    CATEGORIES[3]: "The driver is texting with the left hand while driving.",
    CATEGORIES[4]: "The driver is holding a phone to the left ear while driving.",
    CATEGORIES[5]: "The driver is adjusting the car's multimedia or infotainment system.",
    CATEGORIES[6]: "The driver is drinking water while driving.",
    CATEGORIES[7]: "The driver is reaching toward the back seat to grab something.",
    CATEGORIES[8]: "The driver is applying makeup while driving.",
    CATEGORIES[9]: "The driver is talking to a passenger while driving.",
})

QUERY_TEMPLATE = (
    "How well does this image match the description: “{prompt}”? "
    "Respond with a number between 0 and 1, where 1 means perfect match."
)


class PromptTable(Mapping[Category, str]):
    """Category -> prompt; must cover all ten categories."""

    def __init__(self, prompts: Mapping = PROMPTS):
        table = {category(k): str(v) for k, v in prompts.items()}
        missing = [c.code for c in CATEGORIES if c not in table]
        if missing:
            raise ValidationError(f"prompt table missing {missing}")
        self._table = table

    def __getitem__(self, key) -> str:
        return self._table[category(key)]

    def __iter__(self):
        return iter(CATEGORIES)

    def __len__(self) -> int:
        return len(self._table)


DEFAULT_PROMPTS = PromptTable()


def build_query(cat, table: Mapping = DEFAULT_PROMPTS) -> str:
    return QUERY_TEMPLATE.format(prompt=table[category(cat)])
