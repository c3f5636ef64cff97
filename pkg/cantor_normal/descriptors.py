"""Text descriptors for sequences, index streams and digit streams.

A descriptor is `kind:` followed by `;`-separated `key=value` items. Nested
descriptors are wrapped in brackets, e.g.

    xi:base=[gamma:preset=thm1_7;t=3];c=6,1,1;d=6
    psi:inner=[eta:preset=thm1_7;t=2];P=[gamma:preset=thm1_7;t=2];Q=[constant:3]

The first item may be positional (`constant:5`, `explicit:3,2;periodic=1`,
`preset:thm1_13;scale=desk`). Every object built here reports a descriptor
that parses back to an equal object.
"""
from typing import Dict, List, Tuple

from cantor_normal.constants import PRESETS
from cantor_normal.constructions import (AS_WRITTEN, DESK, EXACT, L_RULES, Preset, ScheduleProfile,
                                         default_profile, exact_schedule, preset)
from cantor_normal.digits import (DigitStream, EtaStream, ExplicitStream, PsiStream, RandomUniformStream,
                                  UpsilonStream, canonicalize_periodic)
from cantor_normal.sequences import (ArithmeticProgression, BasicSequence, ConstantSequence, ConstructionSchedule,
                                     ExplicitIndices, ExplicitSequence, GammaSequence, IndexStream, LambdaSequence,
                                     LinearSequence, XiSequence)
from cantor_normal.utils import DescriptorError, as_fraction, parse_fractions, parse_ints

SEQUENCE_KINDS = ('constant', 'explicit', 'linear', 'xi', 'lambda', 'gamma', 'preset')
STREAM_KINDS = ('eta', 'preset', 'digits', 'random', 'psi', 'upsilon', 'canonical')


def split_top(text: str, sep: str = ';') -> List[str]:
    """Split on `sep` outside brackets."""
    items = []
    depth = 0
    current = []
    for ch in text:
        if ch == '[':
            depth += 1
        elif ch == ']':
            depth -= 1
            if depth < 0:
                raise DescriptorError("Unbalanced ']' in %r" % text)
        if ch == sep and depth == 0:
            items.append(''.join(current).strip())
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise DescriptorError("Unbalanced '[' in %r" % text)
    items.append(''.join(current).strip())
    return [item for item in items if item != '']


def unwrap(text: str) -> str:
    """Drop one pair of brackets enclosing the whole text."""
    text = text.strip()
    if not text.startswith('['):
        return text
    depth = 0
    for i, ch in enumerate(text):
        depth += (ch == '[') - (ch == ']')
        if depth == 0:
            return text[1:-1].strip() if i == len(text) - 1 else text
    raise DescriptorError("Unbalanced '[' in %r" % text)


class Fields(object):
    """The items of one descriptor; unread keys are reported as errors by `done`."""

    def __init__(self, kind: str, positional: List[str], values: Dict[str, str], text: str):
        self.kind = kind
        self.positional = positional
        self.values = values
        self.text = text
        self._used = set()

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default=None, positional: int = None) -> str:
        if key in self.values:
            self._used.add(key)
            return self.values[key]
        if positional is not None and positional < len(self.positional):
            self._used.add(positional)
            return self.positional[positional]
        if default is None:
            raise DescriptorError("%r needs '%s='" % (self.text, key))
        return default

    def get_int(self, key, default=None, positional=None) -> int:
        value = self.get(key, None if default is None else str(default), positional)
        try:
            return int(value)
        except ValueError:
            raise DescriptorError("%s=%r in %r is not an integer" % (key, value, self.text))

    def get_bool(self, key, default: bool = False) -> bool:
        value = self.get(key, str(int(default))).lower()
        if value in ('1', 'true', 'yes'):
            return True
        if value in ('0', 'false', 'no'):
            return False
        raise DescriptorError("%s=%r in %r is not a boolean" % (key, value, self.text))

    def done(self):
        unused = [k for k in self.values if k not in self._used]
        unused += ['#%d' % i for i in range(len(self.positional)) if i not in self._used]
        if unused:
            raise DescriptorError("Unknown items %s in %r" % (unused, self.text))


def parse_fields(text: str, kind_required: bool = True) -> Fields:
    text = unwrap(text)
    kind = ''
    body = text
    head = split_top(text)[0] if text else ''
    if ':' in head and (head.find('=') < 0 or head.find(':') < head.find('=')):
        kind, body = text.split(':', 1)
        kind = kind.strip().lower()
    elif kind_required:
        raise DescriptorError("Descriptors look like 'kind:key=value;...', got %r" % text)
    positional = []
    values = {}
    for item in split_top(body):
        depth_free = item.split('[', 1)[0]
        if '=' in depth_free:
            key, value = item.split('=', 1)
            key = key.strip()
            if key in values:
                raise DescriptorError("Duplicate key %r in %r" % (key, text))
            values[key] = value.strip()
        else:
            if values:
                raise DescriptorError("Positional item %r after key=value items in %r" % (item, text))
            positional.append(item)
    return Fields(kind, positional, values, text)


def _normalize_preset(name: str) -> str:
    name = name.strip().lower().replace('.', '_')
    if name not in PRESETS:
        raise DescriptorError("Unknown preset %r; choose from %s" % (name, PRESETS))
    return name


# ---------------------------------------------------------------------------
# Index streams and schedules


def index_stream_from(fields: Fields) -> IndexStream:
    if fields.has('indices'):
        try:
            return ExplicitIndices(parse_ints(fields.get('indices')))
        except ValueError as e:
            raise DescriptorError(str(e))
    m = fields.get_int('m', 1)
    r = fields.get_int('r', 0)
    if m == 1 and r == 0:
        return IndexStream()
    try:
        return ArithmeticProgression(m, r)
    except ValueError as e:
        raise DescriptorError(str(e))


def parse_index_stream(text: str) -> IndexStream:
    """'m=2;r=1', 'indices=1,4,9' or 'm=1;r=0' for the identity."""
    fields = parse_fields(text, kind_required=False)
    M = index_stream_from(fields)
    fields.done()
    return M


def schedule_from(fields: Fields) -> ConstructionSchedule:
    if fields.has('preset'):
        name = _normalize_preset(fields.get('preset'))
        if name != 'thm1_7':
            raise DescriptorError("Only the thm1_7 schedule has a closed form, got %r" % name)
        l_rule = fields.get('l', AS_WRITTEN)
        if l_rule not in L_RULES:
            raise DescriptorError("l must be one of %s in %r" % (L_RULES, fields.text))
        return exact_schedule(fields.get_int('t'), l_rule)
    name = fields.get('profile', 'custom')
    if not fields.has('b'):
        if name != 'default':
            raise DescriptorError("Profile %r needs b=, w= and l= lists" % name)
        profile = default_profile()
        return ConstructionSchedule(profile.tuples(), descriptor=profile.descriptor())
    lists = {}
    for key in ('k', 'm'):
        lists[key] = parse_ints(fields.get(key)) if fields.has(key) else None
    try:
        profile = ScheduleProfile(parse_ints(fields.get('b')), parse_ints(fields.get('w')),
                                  parse_ints(fields.get('l')), ks=lists['k'], ms=lists['m'], name=name)
        return ConstructionSchedule(profile.tuples(), descriptor=profile.descriptor())
    except ValueError as e:
        raise DescriptorError("%s in %r" % (e, fields.text))


# ---------------------------------------------------------------------------
# Presets


def preset_from(fields: Fields) -> Preset:
    name = _normalize_preset(fields.get('name', positional=0))
    scale = fields.get('scale', EXACT)
    if scale not in (EXACT, DESK):
        raise DescriptorError("scale must be 'exact' or 'desk', got %r" % scale)
    l_rule = fields.get('l', AS_WRITTEN)
    if l_rule not in L_RULES:
        raise DescriptorError("l must be one of %s in %r" % (L_RULES, fields.text))
    params = {}
    for key in ('t', 'k', 'd'):
        if fields.has(key):
            params[key] = fields.get_int(key)
    if fields.has('c'):
        params['c'] = parse_fractions(fields.get('c'))
    if fields.has('Q'):
        params['Q'] = parse_sequence(fields.get('Q'))
    if fields.has('allow_degenerate'):
        params['allow_degenerate'] = fields.get_bool('allow_degenerate')
    fields.done()
    return preset(name, params, scale, l_rule)


def parse_preset(text: str) -> Preset:
    """'preset:thm1_13;scale=desk;c=2,1,2;d=4' to a wired Preset."""
    fields = parse_fields(text)
    if fields.kind != 'preset':
        raise DescriptorError("Expected a preset descriptor, got %r" % text)
    return preset_from(fields)


# ---------------------------------------------------------------------------
# Sequences


def parse_sequence(text: str) -> BasicSequence:
    """Build a basic sequence from its descriptor."""
    fields = parse_fields(text)
    kind = fields.kind
    if kind == 'preset':
        return preset_from(fields).Q
    if kind == 'constant':
        Q = ConstantSequence(fields.get_int('b', positional=0))
    elif kind == 'explicit':
        Q = ExplicitSequence(parse_ints(fields.get('values', positional=0)), fields.get_bool('periodic'))
    elif kind == 'linear':
        Q = LinearSequence(fields.get_int('start', 2), fields.get_int('step', 1))
    elif kind == 'xi':
        try:
            c = [as_fraction(cj) for cj in fields.get('c').split(',')]
        except (ValueError, ZeroDivisionError):
            raise DescriptorError("c=%r in %r is not a list of rationals" % (fields.get('c'), text))
        base = parse_sequence(fields.get('base'))
        d = fields.get_int('d')
        try:
            Q = XiSequence(base, c, d)
        except ValueError as e:
            raise DescriptorError("%s in %r" % (e, text))
    elif kind == 'lambda':
        Q = LambdaSequence(parse_sequence(fields.get('base')), index_stream_from(fields))
    elif kind == 'gamma':
        Q = GammaSequence(schedule_from(fields))
    else:
        raise DescriptorError("Unknown sequence kind %r; choose from %s" % (kind, SEQUENCE_KINDS))
    fields.done()
    return Q


# ---------------------------------------------------------------------------
# Digit streams


def parse_construction(text: str) -> DigitStream:
    """Build a digit stream from its descriptor; the governing sequence is the stream's `Q`."""
    fields = parse_fields(text)
    kind = fields.kind
    if kind == 'preset':
        return preset_from(fields).x
    if kind == 'eta':
        x = EtaStream(schedule_from(fields))
    elif kind == 'digits':
        Q = parse_sequence(fields.get('Q'))
        head = parse_ints(fields.get('head', ''))
        period = parse_ints(fields.get('period', ''))
        x = ExplicitStream(Q, head, period, fields.get_int('E0', 0))
    elif kind == 'random':
        x = RandomUniformStream(parse_sequence(fields.get('Q')), fields.get_int('seed', 0))
    elif kind == 'psi':
        inner = parse_construction(fields.get('inner'))
        P = parse_sequence(fields.get('P')) if fields.has('P') else inner.Q
        targets = [parse_sequence(item) for item in split_top(fields.get('Q'), sep=',')]
        if len(targets) == 0:
            raise DescriptorError("psi needs at least one target in %r" % text)
        x = PsiStream(inner, P, targets)
    elif kind == 'upsilon':
        x = UpsilonStream(parse_construction(fields.get('inner')), index_stream_from(fields))
    elif kind == 'canonical':
        inner = parse_construction(fields.get('inner', positional=0))
        try:
            x = canonicalize_periodic(inner)
        except ValueError as e:
            raise DescriptorError("%s in %r" % (e, text))
    else:
        raise DescriptorError("Unknown stream kind %r; choose from %s" % (kind, STREAM_KINDS))
    fields.done()
    return x


def parse_pair(x_text: str, q_text: str = None) -> Tuple[DigitStream, BasicSequence]:
    """A stream and the sequence to count it against (the stream's own when q_text is empty)."""
    x = parse_construction(x_text)
    Q = parse_sequence(q_text) if q_text else x.Q
    return x, Q
