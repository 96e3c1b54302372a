# src/utils/parser.py
import re
from typing import Any, Dict, List, Optional, Tuple

from src.models.errors import SpecSemanticError, SpecSyntaxError
from src.models.game_spec import (
    ColorSizeSub,
    DynamicsRule,
    GameSpec,
    KillMode,
    LevelDef,
    ObjectClassDef,
    Placement,
    Renderer,
    RewardKind,
    RewardRule,
    RuleKind,
    TerminationDef,
    VariantPresets,
    WinKind,
)

SECTIONS = ("game", "grid", "classes", "dynamics", "rewards", "termination", "variants", "levels")
REQUIRED = ("game", "grid", "classes", "dynamics", "rewards", "termination", "levels")

SECTION_RE = re.compile(r"^\[(?P<name>[a-z_]+)\]$")
SETTING_RE = re.compile(r"^(?P<key>[a-z_]+)\s*=\s*(?P<value>.*)$")
TOKEN_RE = re.compile(r"\S+")
IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
INT_RE = re.compile(r"^-?\d+$")
FLOAT_RE = re.compile(r"^-?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?$")
CELLS_RE = re.compile(r"^(?P<w>\d+)x(?P<h>\d+)$")
COLOR_RE = re.compile(r"^(?P<r>\d{1,3}),(?P<g>\d{1,3}),(?P<b>\d{1,3})$")


class _Line:
    def __init__(self, number: int, raw: str):
        self.number = number
        self.text = raw.strip()
        self.tokens = [(m.group(0), m.start() + 1) for m in TOKEN_RE.finditer(raw)]

    def fail(self, message: str, column: int = 1):
        raise SpecSyntaxError(message, self.number, column)


def _parse_scalar(text: str):
    if INT_RE.match(text):
        return int(text)
    if FLOAT_RE.match(text):
        return float(text)
    return text


def parse_value(text: str):
    """Parse a rule parameter: int, float, comma tuple of numbers, or bare word."""
    if "," in text and ":" not in text:
        return tuple(_parse_scalar(part) for part in text.split(","))
    return _parse_scalar(text)


def format_value(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean parameters are not part of the grammar")
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _color(line: _Line, text: str, column: int) -> Tuple[int, int, int]:
    m = COLOR_RE.match(text)
    if not m or any(int(v) > 255 for v in m.groups()):
        line.fail(f"expected colour r,g,b in 0..255, got '{text}'", column)
    return int(m["r"]), int(m["g"]), int(m["b"])


def _cells(line: _Line, text: str, column: int) -> Tuple[int, int]:
    m = CELLS_RE.match(text)
    if not m:
        line.fail(f"expected size WxH, got '{text}'", column)
    return int(m["w"]), int(m["h"])


def _int(line: _Line, text: str, column: int) -> int:
    if not INT_RE.match(text):
        line.fail(f"expected integer, got '{text}'", column)
    return int(text)


def _ident(line: _Line, text: str, column: int) -> str:
    if not IDENT_RE.match(text):
        line.fail(f"expected identifier, got '{text}'", column)
    return text


def _pairs(line: _Line, tokens) -> List[Tuple[str, str, int]]:
    pairs = []
    for token, column in tokens:
        if "=" not in token:
            line.fail(f"expected key=value, got '{token}'", column)
        key, value = token.split("=", 1)
        if not key or not value:
            line.fail(f"expected key=value, got '{token}'", column)
        pairs.append((key, value, column))
    return pairs


def _settings(lines: List[_Line]) -> Dict[str, Tuple[str, _Line]]:
    settings = {}
    for line in lines:
        m = SETTING_RE.match(line.text.strip())
        if not m:
            line.fail(f"expected 'key = value', got '{line.text.strip()}'")
        settings[m["key"]] = (m["value"].strip(), line)
    return settings


def _require(settings, key: str, section: str, fallback_line: int):
    if key not in settings:
        raise SpecSyntaxError(f"[{section}] is missing '{key}'", fallback_line)
    return settings[key]


class SpecParser:
    """Reader and canonical writer for the line-oriented game description format."""

    @staticmethod
    def split_sections(text: str) -> Dict[str, List[_Line]]:
        sections: Dict[str, List[_Line]] = {}
        current: Optional[str] = None
        for number, raw in enumerate(text.splitlines(), start=1):
            content = raw.split("#", 1)[0]
            stripped = content.strip()
            if not stripped:
                continue
            line = _Line(number, content)
            m = SECTION_RE.match(stripped)
            if m:
                name = m["name"]
                if name not in SECTIONS:
                    line.fail(f"unknown section [{name}]", 2)
                if name in sections:
                    line.fail(f"duplicate section [{name}]")
                sections[name] = []
                current = name
                continue
            if current is None:
                line.fail("content before the first section header")
            sections[current].append(line)
        if not sections:
            raise SpecSyntaxError("empty document", 1, 1)
        last = len(text.splitlines()) or 1
        for name in REQUIRED:
            if name not in sections:
                raise SpecSyntaxError(f"missing section [{name}]", last)
        return sections

    @staticmethod
    def parse(text: str) -> GameSpec:
        sections = SpecParser.split_sections(text)
        end = len(text.splitlines())

        game = _settings(sections["game"])
        name_text, name_line = _require(game, "name", "game", end)
        name = _ident(name_line, name_text, 1)
        renderer_text, renderer_line = game.get("renderer", ("flat_rect", name_line))
        try:
            renderer = Renderer(renderer_text)
        except ValueError:
            renderer_line.fail(f"unknown renderer '{renderer_text}'")
        background = (0, 0, 0)
        if "background" in game:
            text_, line = game["background"]
            background = _color(line, text_, 1)
        max_score = 0
        if "max_score" in game:
            text_, line = game["max_score"]
            max_score = _int(line, text_, 1)
        actions_text, actions_line = _require(game, "actions", "game", end)
        actions = tuple(_ident(actions_line, a, 1) for a in actions_text.split())

        grid = _settings(sections["grid"])
        w_text, w_line = _require(grid, "width", "grid", end)
        h_text, h_line = _require(grid, "height", "grid", end)
        width, height = _int(w_line, w_text, 1), _int(h_line, h_text, 1)

        classes = tuple(SpecParser._parse_class(line) for line in sections["classes"])
        dynamics = tuple(SpecParser._parse_rule(line) for line in sections["dynamics"])
        rewards = tuple(SpecParser._parse_reward(line) for line in sections["rewards"])
        termination = SpecParser._parse_termination(sections["termination"], end)
        variants = SpecParser._parse_variants(sections.get("variants", []))
        levels = SpecParser._parse_levels(sections["levels"])

        spec = GameSpec(
            name=name,
            grid_width=width,
            grid_height=height,
            object_classes=classes,
            dynamics_rules=dynamics,
            reward_rules=rewards,
            levels=levels,
            termination=termination,
            actions=actions,
            renderer=renderer,
            background=background,
            max_score=max_score,
            variants=variants,
        )
        validate_spec(spec)
        return spec

    @staticmethod
    def _parse_class(line: _Line) -> ObjectClassDef:
        (class_id, column), *rest = line.tokens
        _ident(line, class_id, column)
        fields: Dict[str, Any] = {}
        for key, value, col in _pairs(line, rest):
            if key == "color":
                fields["color"] = _color(line, value, col)
            elif key in ("size", "hitbox"):
                fields[key] = _cells(line, value, col)
            elif key == "sprite":
                fields["sprite_id"] = _ident(line, value, col)
            elif key == "role":
                fields["role"] = _ident(line, value, col)
            else:
                line.fail(f"unknown class attribute '{key}'", col)
        for required in ("color", "size", "sprite_id"):
            if required not in fields:
                line.fail(f"class '{class_id}' is missing '{required.replace('_id', '')}'")
        return ObjectClassDef(class_id=class_id, **fields)

    @staticmethod
    def _parse_rule(line: _Line) -> DynamicsRule:
        if len(line.tokens) < 2:
            line.fail("expected '<rule> <class> key=value...'")
        (kind_text, kind_col), (class_id, class_col), *rest = line.tokens
        try:
            kind = RuleKind(kind_text)
        except ValueError:
            line.fail(f"unknown dynamics rule '{kind_text}'", kind_col)
        _ident(line, class_id, class_col)
        params = tuple((key, parse_value(value)) for key, value, _ in _pairs(line, rest))
        return DynamicsRule(kind=kind, class_id=class_id, params=params)

    @staticmethod
    def _parse_reward(line: _Line) -> RewardRule:
        (kind_text, kind_col), *rest = line.tokens
        try:
            kind = RewardKind(kind_text)
        except ValueError:
            line.fail(f"unknown reward rule '{kind_text}'", kind_col)
        first = second = None
        if kind is RewardKind.CONTACT:
            if len(rest) < 2:
                line.fail("contact needs two class names", kind_col)
            (first, c1), (second, c2), *rest = rest
            _ident(line, first, c1)
            _ident(line, second, c2)
        reward, kill = 0, KillMode.NONE
        for key, value, col in _pairs(line, rest):
            if key == "reward":
                reward = _int(line, value, col)
            elif key == "kill":
                try:
                    kill = KillMode(value)
                except ValueError:
                    line.fail(f"unknown kill mode '{value}'", col)
            else:
                line.fail(f"unknown reward attribute '{key}'", col)
        return RewardRule(kind=kind, first=first, second=second, reward=reward, kill=kill)

    @staticmethod
    def _parse_termination(lines: List[_Line], end: int) -> TerminationDef:
        settings = _settings(lines)
        win_text, win_line = _require(settings, "win", "termination", end)
        words = win_text.split()
        try:
            win = WinKind(words[0])
        except (ValueError, IndexError):
            win_line.fail(f"unknown win condition '{win_text}'")
        win_class, win_count = None, 0
        if win is WinKind.COLLECT:
            if len(words) != 3:
                win_line.fail("expected 'collect <class> <count>'")
            win_class, win_count = _ident(win_line, words[1], 1), _int(win_line, words[2], 1)
        elif win is WinKind.CLEAR:
            if len(words) != 2:
                win_line.fail("expected 'clear <class>'")
            win_class = _ident(win_line, words[1], 1)
        elif len(words) != 1:
            win_line.fail("'survive' takes no arguments")
        numbers = {}
        for key in ("timeout", "level_bonus", "lose_penalty"):
            if key in settings:
                text_, line = settings[key]
                numbers[key] = _int(line, text_, 1)
        for key, (_, line) in settings.items():
            if key not in ("win", "timeout", "level_bonus", "lose_penalty"):
                line.fail(f"unknown termination setting '{key}'")
        return TerminationDef(win=win, win_class=win_class, win_count=win_count, **numbers)

    @staticmethod
    def _parse_variants(lines: List[_Line]) -> VariantPresets:
        position: Tuple[str, ...] = ()
        fraction = 0.5
        rows: Optional[Tuple[int, int]] = None
        colorsize: List[ColorSizeSub] = []
        image: List[Tuple[str, str]] = []
        for line in lines:
            m = SETTING_RE.match(line.text)
            if m and m["key"] == "position":
                position = tuple(_ident(line, w, 1) for w in m["value"].split())
                continue
            if m and m["key"] == "position_fraction":
                value = _parse_scalar(m["value"].strip())
                if not isinstance(value, (int, float)):
                    line.fail("position_fraction must be a number")
                fraction = float(value)
                continue
            if m and m["key"] == "position_rows":
                bounds = m["value"].split()
                if len(bounds) != 2:
                    line.fail("expected 'position_rows = <first> <last>'")
                rows = (_int(line, bounds[0], 1), _int(line, bounds[1], 1))
                continue
            (head, head_col), *rest = line.tokens
            if head not in ("colorsize", "image") or not rest:
                line.fail(f"unknown variant entry '{line.text}'", head_col)
            (class_id, class_col), *rest = rest
            _ident(line, class_id, class_col)
            pairs = _pairs(line, rest)
            if head == "colorsize":
                color = size = None
                for key, value, col in pairs:
                    if key == "color":
                        color = _color(line, value, col)
                    elif key == "size":
                        size = _cells(line, value, col)
                    else:
                        line.fail(f"unknown colorsize attribute '{key}'", col)
                colorsize.append(ColorSizeSub(class_id, color, size))
            else:
                sprite = dict((k, v) for k, v, _ in pairs).get("sprite")
                if sprite is None or len(pairs) != 1:
                    line.fail("expected 'image <class> sprite=<id>'")
                image.append((class_id, _ident(line, sprite, 1)))
        return VariantPresets(position, fraction, tuple(colorsize), tuple(image), rows)

    @staticmethod
    def _parse_levels(lines: List[_Line]) -> Tuple[LevelDef, ...]:
        levels: List[LevelDef] = []
        header: Optional[Tuple[int, tuple]] = None
        placements: List[Placement] = []

        def close():
            if header is not None:
                levels.append(LevelDef(index=header[0], placements=tuple(placements), params=header[1]))

        for line in lines:
            (head, head_col), *rest = line.tokens
            if head == "level":
                close()
                if not rest:
                    line.fail("expected 'level <index>'", head_col)
                (index_text, index_col), *rest = rest
                index = _int(line, index_text, index_col)
                if index != len(levels):
                    line.fail(f"levels must be numbered consecutively from 0, got {index}", index_col)
                params = []
                for key, value, col in _pairs(line, rest):
                    if "." not in key:
                        line.fail(f"level parameters are written class.param, got '{key}'", col)
                    params.append((key, parse_value(value)))
                header = (index, tuple(params))
                placements = []
            elif head == "place":
                if header is None:
                    line.fail("'place' before any 'level' line", head_col)
                if len(rest) != 3:
                    line.fail("expected 'place <class> <x> <y>'", head_col)
                (cid, c0), (xs, c1), (ys, c2) = rest
                placements.append(Placement(_ident(line, cid, c0), _int(line, xs, c1), _int(line, ys, c2)))
            else:
                line.fail(f"unknown level entry '{head}'", head_col)
        close()
        return tuple(levels)

    @staticmethod
    def serialize(spec: GameSpec) -> str:
        out = ["[game]", f"name = {spec.name}", f"renderer = {spec.renderer.value}",
               f"background = {format_value(spec.background)}", f"max_score = {spec.max_score}",
               f"actions = {' '.join(spec.actions)}", "", "[grid]",
               f"width = {spec.grid_width}", f"height = {spec.grid_height}", "", "[classes]"]
        for c in spec.object_classes:
            parts = [c.class_id, f"color={format_value(c.color)}", f"size={c.size[0]}x{c.size[1]}",
                     f"sprite={c.sprite_id}"]
            if c.hitbox != c.size:
                parts.append(f"hitbox={c.hitbox[0]}x{c.hitbox[1]}")
            if c.role:
                parts.append(f"role={c.role}")
            out.append(" ".join(parts))
        out += ["", "[dynamics]"]
        for r in spec.dynamics_rules:
            out.append(" ".join([r.kind.value, r.class_id] + [f"{k}={format_value(v)}" for k, v in r.params]))
        out += ["", "[rewards]"]
        for rw in spec.reward_rules:
            parts = [rw.kind.value]
            if rw.kind is RewardKind.CONTACT:
                parts += [rw.first, rw.second]
            parts.append(f"reward={rw.reward}")
            if rw.kill is not KillMode.NONE:
                parts.append(f"kill={rw.kill.value}")
            out.append(" ".join(parts))
        t = spec.termination
        win = t.win.value
        if t.win is WinKind.COLLECT:
            win = f"collect {t.win_class} {t.win_count}"
        elif t.win is WinKind.CLEAR:
            win = f"clear {t.win_class}"
        out += ["", "[termination]", f"win = {win}", f"timeout = {t.timeout}",
                f"level_bonus = {t.level_bonus}", f"lose_penalty = {t.lose_penalty}"]
        v = spec.variants
        out += ["", "[variants]", f"position = {' '.join(v.position_classes)}".rstrip(),
                f"position_fraction = {format_value(float(v.position_fraction))}"]
        if v.position_rows is not None:
            out.append(f"position_rows = {v.position_rows[0]} {v.position_rows[1]}")
        for sub in v.colorsize:
            parts = ["colorsize", sub.class_id]
            if sub.color is not None:
                parts.append(f"color={format_value(sub.color)}")
            if sub.size is not None:
                parts.append(f"size={sub.size[0]}x{sub.size[1]}")
            out.append(" ".join(parts))
        for class_id, sprite in v.image:
            out.append(f"image {class_id} sprite={sprite}")
        out += ["", "[levels]"]
        for level in spec.levels:
            out.append(" ".join([f"level {level.index}"] + [f"{k}={format_value(val)}" for k, val in level.params]))
            out += [f"place {p.class_id} {p.x} {p.y}" for p in level.placements]
        return "\n".join(out) + "\n"


def _fits(spec: GameSpec, class_id: str, x: int, y: int) -> bool:
    w, h = spec.class_def(class_id).hitbox
    return 0 <= x and 0 <= y and x + w <= spec.grid_width and y + h <= spec.grid_height


def validate_spec(spec: GameSpec) -> GameSpec:
    if spec.grid_width < 1 or spec.grid_height < 1:
        raise SpecSemanticError(
            f"grid is {spec.grid_width}x{spec.grid_height}", "grid dimensions must be at least 1x1")
    seen = set()
    for c in spec.object_classes:
        if c.class_id in seen:
            raise SpecSemanticError(f"class '{c.class_id}' declared twice", "class_id must be unique")
        seen.add(c.class_id)
        if min(c.size) < 1:
            raise SpecSemanticError(f"class '{c.class_id}' has size {c.size}", "size components must be >= 1")
        if c.size[0] > c.hitbox[0] or c.size[1] > c.hitbox[1]:
            raise SpecSemanticError(
                f"class '{c.class_id}' size {c.size} exceeds hitbox {c.hitbox}", "size must fit inside hitbox")
    signatures = [c.signature for c in spec.object_classes]
    if len(set(signatures)) != len(signatures):
        raise SpecSemanticError("two classes share colour and size", "class appearances must be distinct")

    def declared(class_id, where):
        if class_id not in seen:
            raise SpecSemanticError(f"undeclared class '{class_id}' in {where}", "classes must be declared")

    players = [r for r in spec.dynamics_rules if r.kind is RuleKind.PLAYER]
    if len(players) != 1:
        raise SpecSemanticError(
            f"found {len(players)} player rules", "exactly one class must carry the player marker")
    if not spec.actions:
        raise SpecSemanticError("no actions declared", "action set must not be empty")
    for rule in spec.dynamics_rules:
        for class_id in rule.referenced_classes():
            declared(class_id, f"dynamics rule '{rule.kind.value}'")
    for key, _ in players[0].params:
        if key not in ("edge", "max_shots") and key not in spec.actions:
            raise SpecSemanticError(f"player binds unknown key '{key}'", "player keys must be declared actions")
    for rw in spec.reward_rules:
        for class_id in (rw.first, rw.second):
            if class_id is not None:
                declared(class_id, "rewards")
    t = spec.termination
    if t.win_class is not None:
        declared(t.win_class, "termination")
    if t.win is WinKind.SURVIVE and t.timeout <= 0:
        raise SpecSemanticError("survive termination without timeout", "timeout must be > 0")
    if t.timeout < 0:
        raise SpecSemanticError(f"timeout {t.timeout}", "timeout must be > 0")
    for class_id in spec.variants.position_classes:
        declared(class_id, "variants")
    rows = spec.variants.position_rows
    if rows is not None and not 0 <= rows[0] <= rows[1] < spec.grid_height:
        raise SpecSemanticError(
            f"position_rows {rows[0]} {rows[1]}", "position rows must be an ordered band in the grid")
    for sub in spec.variants.colorsize:
        declared(sub.class_id, "variants")
    for class_id, _ in spec.variants.image:
        declared(class_id, "variants")
    if not spec.levels:
        raise SpecSemanticError("no levels declared", "at least one level is required")
    player = players[0].class_id
    for level in spec.levels:
        for key, _ in level.params:
            declared(key.split(".", 1)[0], f"level {level.index} parameters")
        for p in level.placements:
            declared(p.class_id, f"level {level.index}")
            if not _fits(spec, p.class_id, p.x, p.y):
                raise SpecSemanticError(
                    f"'{p.class_id}' at ({p.x}, {p.y}) in level {level.index}", "placements must lie in the grid")
        if level.count(player) != 1:
            raise SpecSemanticError(
                f"level {level.index} places {level.count(player)} '{player}'", "each level places one player")
    return spec
