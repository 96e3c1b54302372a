import logging
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from src.models.errors import NotApplicable, SpecSemanticError
from src.models.game_spec import (
    ColorSizeSub,
    GameSpec,
    ObjectClassDef,
    Placement,
    Renderer,
    VariantKind,
    VariantName,
)
from src.utils.parser import SpecParser, validate_spec

logger = logging.getLogger(__name__)

BUILTIN_GAMES = ("myaliensv1", "myaliensv2", "roadrash", "spaceinvaders")
SPECS_DIR = Path(__file__).resolve().parents[2] / "data" / "specs"


def parse(text: str) -> GameSpec:
    return SpecParser.parse(text)


def serialize(spec: GameSpec) -> str:
    return SpecParser.serialize(spec)


def load_spec(path) -> GameSpec:
    with open(path, "r", encoding="utf-8") as f:
        return parse(f.read())


@lru_cache(maxsize=None)
def _load_builtins(specs_dir: str) -> Tuple[Tuple[str, GameSpec], ...]:
    return tuple((name, load_spec(Path(specs_dir) / f"{name}.game")) for name in BUILTIN_GAMES)


def builtin_specs(specs_dir: Optional[str] = None) -> Dict[str, GameSpec]:
    """The four shipped games keyed by name."""
    return dict(_load_builtins(str(specs_dir or SPECS_DIR)))


def resolve_spec(name_or_path: str, specs_dir: Optional[str] = None) -> GameSpec:
    specs = builtin_specs(specs_dir)
    if name_or_path in specs:
        return specs[name_or_path]
    return load_spec(name_or_path)


def apply_variant(spec: GameSpec, kind: VariantKind) -> GameSpec:
    if kind.name is VariantName.BASE:
        return spec
    if kind.name is VariantName.MOD_COLORSIZE:
        return _mod_colorsize(spec, kind)
    if kind.name is VariantName.MOD_IMAGE:
        return _mod_image(spec, kind)
    return _mod_position(spec, kind)


def _mod_colorsize(spec: GameSpec, kind: VariantKind) -> GameSpec:
    table = kind.colorsize if kind.colorsize is not None else spec.variants.colorsize
    if not table:
        raise NotApplicable(f"{spec.name} declares no colour/size substitutions")
    subs = {sub.class_id: sub for sub in table}
    if spec.player_class in subs:
        raise SpecSemanticError(f"'{spec.player_class}' is player controlled", "colour/size never changes the player")
    classes = tuple(_substitute(c, subs[c.class_id]) if c.class_id in subs else c for c in spec.object_classes)
    return validate_spec(replace(spec, object_classes=classes))


def _substitute(c: ObjectClassDef, sub: ColorSizeSub) -> ObjectClassDef:
    size = sub.size or c.size
    # a grown appearance grows the hitbox with it; a shrunk one keeps the old hitbox
    hitbox = (max(c.hitbox[0], size[0]), max(c.hitbox[1], size[1]))
    return replace(c, color=sub.color or c.color, size=size, hitbox=hitbox)


def _mod_image(spec: GameSpec, kind: VariantKind) -> GameSpec:
    if spec.renderer is Renderer.FLAT_RECT:
        raise NotApplicable(f"Image modification is not applicable: {spec.name} draws flat rectangles")
    table = dict(kind.image if kind.image is not None else spec.variants.image)
    if not table:
        raise NotApplicable(f"{spec.name} declares no sprite substitutions")
    classes = tuple(replace(c, sprite_id=table.get(c.class_id, c.sprite_id)) for c in spec.object_classes)
    return validate_spec(replace(spec, object_classes=classes))


def _cells(spec: GameSpec, p: Placement) -> Set[Tuple[int, int]]:
    w, h = spec.class_def(p.class_id).hitbox
    return {(p.x + dx, p.y + dy) for dx in range(w) for dy in range(h)}


def _mod_position(spec: GameSpec, kind: VariantKind) -> GameSpec:
    targets = spec.variants.position_classes
    if not targets:
        raise NotApplicable(f"Position modification is not applicable: {spec.name} spawns its objects at random")
    if spec.player_class in targets:
        raise SpecSemanticError(f"'{spec.player_class}' is player controlled", "position never moves the player")
    fraction = spec.variants.position_fraction if kind.fraction is None else kind.fraction
    if not 0.0 <= fraction <= 1.0:
        raise SpecSemanticError(f"fraction {fraction}", "position fraction must lie in [0, 1]")

    low, high = spec.variants.position_rows or (0, spec.grid_height - 1)
    levels = []
    for level in spec.levels:
        rng = np.random.default_rng([kind.seed, level.index])
        placements: List[Placement] = list(level.placements)
        movable = [i for i, p in enumerate(placements) if p.class_id in targets]
        count = int(round(fraction * len(movable)))
        if fraction > 0 and movable:
            count = max(count, 1)
        chosen = sorted(int(i) for i in rng.choice(movable, size=count, replace=False)) if count else []
        occupied: Set[Tuple[int, int]] = set()
        for p in placements:
            occupied |= _cells(spec, p)

        for i in chosen:
            original = placements[i]
            occupied -= _cells(spec, original)
            w, h = spec.class_def(original.class_id).hitbox
            free = [
                (x, y)
                for y in range(low, min(high, spec.grid_height - h) + 1)
                for x in range(0, spec.grid_width - w + 1)
                if (x, y) != (original.x, original.y)
                and not _cells(spec, Placement(original.class_id, x, y)) & occupied
            ]
            if free:
                x, y = free[int(rng.integers(len(free)))]
                placements[i] = Placement(original.class_id, x, y)
            occupied |= _cells(spec, placements[i])
        levels.append(replace(level, placements=tuple(placements)))
        logger.debug("level %d: redrew %d of %d placements", level.index, len(chosen), len(movable))
    return validate_spec(replace(spec, levels=tuple(levels)))
