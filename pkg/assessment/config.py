"""
Run configuration: one YAML (or JSON) document, checked against `RUN_SCHEMA`, with command line
flags layered on top.

    input:
      file_x: data/X.csv
      file_y: data/Y.csv
    variables:
      - {name: SA1, t_range: 200, blocking: true}
      - {name: BYEAR, t_range: 85, tolerance: 2}
    mode: extended
    cutoff: 0
    samples: 1000
    thinning: 1000
    output: out/
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, replace, asdict
from typing import Optional, Mapping

import jsonschema
import yaml
from django.conf import settings

from records.data import VariableSpec, LinkageMode, MugProfile
from records.errors import ConfigurationError, ReportIOError
from synthgen.data import GeneratorConfig

logger = logging.getLogger(__name__)

_number = {'type': 'number'}
_probability = {'type': 'number', 'minimum': 0, 'maximum': 1}
_mode = {'type': 'string', 'enum': [choice.value for choice in LinkageMode]}

RUN_SCHEMA = {
    'type': 'object',
    'properties': {
        'input': {
            'type': 'object',
            'properties': {
                'file_x': {'type': 'string'},
                'file_y': {'type': 'string'},
                'id_field': {'type': 'string'},
                'missing_token': {'type': 'string'},
                'alignment': {'type': 'string'},
            },
            'required': ['file_x', 'file_y'],
            'additionalProperties': False,
        },
        'synthgen': {'type': 'object'},
        'variables': {
            'type': 'array',
            'minItems': 1,
            'items': {
                'type': 'object',
                'properties': {
                    'name': {'type': 'string'},
                    't_range': {'type': 'number', 'exclusiveMinimum': 0},
                    'tolerance': {'type': 'number', 'minimum': 0},
                    'missing_sentinel': _number,
                    'blocking': {'type': 'boolean'},
                },
                'required': ['name', 't_range'],
                'additionalProperties': False,
            },
        },
        'blocking': {'type': 'array', 'items': {'type': 'string'}},
        'mode': _mode,
        'cutoff': _number,
        'samples': {'type': 'integer', 'minimum': 1},
        'thinning': {'type': 'integer', 'minimum': 1},
        'seed': {'type': 'integer', 'minimum': 0},
        'jobs': {'type': 'integer'},
        'mug': {
            'type': 'object',
            'additionalProperties': {
                'type': 'object',
                'properties': {'m': _probability, 'u': _probability, 'g': _probability},
                'required': ['m', 'u', 'g'],
                'additionalProperties': False,
            },
        },
        'mug_file': {'type': 'string'},
        'reestimate_mug': {'type': 'boolean'},
        'max_blocks': {'type': 'integer', 'minimum': 1},
        'dump_snapshots': {'type': 'boolean'},
        'snapshots_from': {'type': 'string'},
        'output': {'type': 'string'},
        'variants': {
            'type': 'array',
            'minItems': 1,
            'items': {
                'type': 'object',
                'properties': {
                    'name': {'type': 'string'},
                    'mode': _mode,
                    'cutoff': _number,
                    'tolerances': {'type': 'object', 'additionalProperties': {'type': 'number', 'minimum': 0}},
                },
                'required': ['name'],
                'additionalProperties': False,
            },
        },
    },
    'required': ['variables'],
    'oneOf': [{'required': ['input']}, {'required': ['synthgen']}],
    'additionalProperties': False,
}


@dataclass(frozen=True)
class InputFiles:
    file_x: str
    file_y: str
    id_field: str = getattr(settings, 'MACSIM_ID_FIELD', 'RECID')
    missing_token: str = getattr(settings, 'MACSIM_MISSING_TOKEN', '')
    alignment: Optional[str] = None


@dataclass(frozen=True)
class Variant:
    """ One linking method of a comparison: a mode, a cutoff and per-variable tolerances. """
    name: str
    mode: Optional[str] = None
    cutoff: Optional[float] = None
    tolerances: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    variables: tuple
    input: Optional[InputFiles] = None
    synthgen: Optional[GeneratorConfig] = None
    blocking: tuple = ()
    mode: str = LinkageMode.EXTENDED
    cutoff: float = getattr(settings, 'MACSIM_DEFAULT_CUTOFF', 0.0)
    samples: int = getattr(settings, 'MACSIM_DEFAULT_SAMPLES', 1000)
    thinning: int = getattr(settings, 'MACSIM_DEFAULT_THINNING', 1000)
    seed: int = getattr(settings, 'MACSIM_DEFAULT_SEED', 0)
    jobs: int = getattr(settings, 'MACSIM_DEFAULT_JOBS', 1)
    mug: Optional[dict] = None
    mug_file: Optional[str] = None
    reestimate_mug: bool = False
    max_blocks: Optional[int] = None
    dump_snapshots: bool = False
    snapshots_from: Optional[str] = None
    output: str = 'macsim-output'
    variants: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'variables', tuple(self.variables))
        object.__setattr__(self, 'blocking', tuple(self.blocking))
        object.__setattr__(self, 'variants', tuple(self.variants))
        object.__setattr__(self, 'mode', LinkageMode(self.mode))
        if (self.input is None) == (self.synthgen is None):
            raise ConfigurationError('Give exactly one of `input` and `synthgen`.')
        names = [spec.name for spec in self.variables]
        if len(set(names)) != len(names):
            raise ConfigurationError('Variable names must be unique.')
        unknown = [var for var in self.blocking if var not in names]
        if unknown:
            raise ConfigurationError(f'Blocking variables not declared: {", ".join(unknown)}')
        if not self.linking_specs:
            raise ConfigurationError('Every declared variable is a blocking variable; nothing is left to link on.')
        if self.samples < 1 or self.thinning < 1:
            raise ConfigurationError('samples and thinning must be positive.')
        if self.seed < 0:
            raise ConfigurationError('The seed must be non-negative.')
        if self.mug:
            undeclared = [var for var in self.mug if var not in names]
            if undeclared:
                raise ConfigurationError(f'm/u/g given for undeclared variables: {", ".join(undeclared)}')
        variant_names = [variant.name for variant in self.variants]
        if len(set(variant_names)) != len(variant_names):
            raise ConfigurationError('Variant names must be unique.')
        for variant in self.variants:
            stray = [var for var in variant.tolerances if var not in names]
            if stray:
                raise ConfigurationError(f'Variant `{variant.name}` sets tolerances of undeclared {", ".join(stray)}')
            for spec in self.variables:
                if spec.name in variant.tolerances:
                    # raises on a tolerance that pushes theta to 0.5 or below
                    spec.with_tolerance(variant.tolerances[spec.name])
        if self.variants and self.variant_mode(self.variants[0]) == LinkageMode.ORIGINAL:
            # the first variant's mode fixes the matrix; 0/1 values would hide every tolerance
            extended = [v.name for v in self.variants if self.variant_mode(v) == LinkageMode.EXTENDED]
            if extended:
                raise ConfigurationError(
                    f'Variant `{self.variants[0].name}` drives the simulation in original mode, so extended '
                    f'variants ({", ".join(extended)}) could not apply their tolerances. List an extended variant first.'
                )

    @property
    def linking_specs(self) -> list[VariableSpec]:
        return [spec for spec in self.variables if spec.name not in self.blocking]

    def variant_specs(self, variant: Variant) -> list[VariableSpec]:
        return [spec.with_tolerance(variant.tolerances[spec.name]) if spec.name in variant.tolerances else spec
                for spec in self.linking_specs]

    def variant_mode(self, variant: Variant) -> str:
        return LinkageMode(variant.mode or self.mode)

    def variant_cutoff(self, variant: Variant) -> float:
        return self.cutoff if variant.cutoff is None else float(variant.cutoff)

    @property
    def method_variants(self) -> tuple:
        """ The variants to assess; a plain run has one, named after its mode. """
        return self.variants or (Variant(name=str(self.mode)),)

    def mug_overrides(self) -> Optional[dict]:
        """ Externally known m/u/g values: the file first, then the document's `mug` entries on top. """
        overrides = {}
        if self.mug_file:
            try:
                overrides.update(MugProfile.from_csv(self.mug_file).as_overrides())
            except OSError as e:
                raise ReportIOError(f'Could not read {self.mug_file}: {e}')
        if self.mug:
            overrides.update(self.mug)
        return overrides or None

    def with_overrides(self, **options) -> 'RunConfig':
        """ Command line flags win over the document; None means 'not given'. """
        changes = {key: value for key, value in options.items() if value is not None}
        if 'blocking' in changes and isinstance(changes['blocking'], str):
            changes['blocking'] = tuple(var.strip() for var in changes['blocking'].split(',') if var.strip())
        if 'seed' in changes and self.synthgen is not None:
            changes['synthgen'] = replace(self.synthgen, seed=changes['seed'])
        return replace(self, **changes)

    def as_dict(self) -> dict:
        out = asdict(self)
        out['mode'] = str(self.mode)
        return out

    def digest(self) -> str:
        """ Fingerprint of everything that shapes the results. """
        payload = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()


# Loading
# -*-*-*-
def _resolve(path: Optional[str], base_dir: str) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def validate_document(document) -> None:
    validator = jsonschema.Draft7Validator(RUN_SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.path))
    if errors:
        details = '; '.join(f'{"/".join(str(p) for p in e.path) or "(document)"}: {e.message}' for e in errors)
        raise ConfigurationError(f'Invalid run configuration: {details}')


def build_run_config(document: Mapping, base_dir: str = '.') -> RunConfig:
    """ RunConfig from an already parsed document; relative paths are taken from `base_dir`. """
    validate_document(document)
    specs = [VariableSpec(**entry) for entry in document['variables']]
    blocking = document.get('blocking')
    if blocking is None:
        blocking = [spec.name for spec in specs if spec.blocking]

    input_files = None
    if 'input' in document:
        raw = dict(document['input'])
        for key in ('file_x', 'file_y', 'alignment'):
            raw[key] = _resolve(raw.get(key), base_dir)
        input_files = InputFiles(**{key: value for key, value in raw.items() if value is not None})
    synthgen = GeneratorConfig.from_mapping(document['synthgen']) if 'synthgen' in document else None

    variants = [Variant(name=entry['name'], mode=entry.get('mode'), cutoff=entry.get('cutoff'),
                        tolerances=dict(entry.get('tolerances', {})))
                for entry in document.get('variants', [])]
    keys = ('mode', 'cutoff', 'samples', 'thinning', 'seed', 'jobs', 'mug', 'reestimate_mug', 'max_blocks',
            'dump_snapshots')
    options = {key: document[key] for key in keys if key in document}
    for key in ('mug_file', 'snapshots_from', 'output'):
        if key in document:
            options[key] = _resolve(document[key], base_dir)
    if 'seed' in document and synthgen is not None and 'seed' not in document['synthgen']:
        synthgen = replace(synthgen, seed=document['seed'])
    return RunConfig(variables=tuple(specs), input=input_files, synthgen=synthgen, blocking=tuple(blocking),
                     variants=tuple(variants), **options)


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            # JSON documents are YAML documents too
            document = yaml.safe_load(f)
    except OSError as e:
        raise ReportIOError(f'Could not read {path}: {e}')
    except yaml.YAMLError as e:
        raise ConfigurationError(f'{path} is not valid YAML/JSON: {e}')
    if not isinstance(document, dict):
        raise ConfigurationError(f'{path} must hold a mapping of settings.')
    logger.debug('loaded run configuration from %s', path)
    return build_run_config(document, base_dir=os.path.dirname(os.path.abspath(path)))
