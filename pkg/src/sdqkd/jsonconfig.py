# SPDX-License-Identifier: MIT
"""Sectioned configuration store.

A config holds named sections of key/value pairs read from JSON
files and CSV recipes. The encoder class writes numpy scalars
and arrays as plain numbers and lists.

A section may carry a schema, a dict of option descriptions
using these keys:

    type : (str) one of 'none', 'str', 'int', 'float', 'choice'
    prompt : (str) short description of the option
    hint : (str) additional info for the option
    options : (dict) choice keys mapped to descriptions
    default : (misc) value returned when the option is unset or invalid
    control : (str) 'section' marks a title entry without a value,
              any other value (default 'text') holds a value

Recipe files for the command line are CSV key,value rows,
with 'section,<name>' rows selecting the target section and
'#' starting a comment row.
"""

import json
import os
import csv
import logging
import numpy as np

_log = logging.getLogger('jsonconfig')
_log.setLevel(logging.DEBUG)


def _to_str(value, option):
    if not isinstance(value, str):
        raise ValueError('not a string')
    return value


def _to_choice(value, option):
    if isinstance(value, str):
        value = value.strip().lower()
        if value in option.get('options', {}):
            return value
    raise ValueError('not one of ' + ', '.join(option.get('options', {})))


def _to_int(value, option):
    return int(value)


def _to_float(value, option):
    return float(value)


# schema type -> (converter, problem label)
_CONVERT = {
    'str': (_to_str, 'invalid string'),
    'int': (_to_int, 'invalid integer'),
    'float': (_to_float, 'invalid number'),
    'choice': (_to_choice, 'invalid choice'),
}


def _holds_value(option):
    return (option.get('type', 'str') != 'none'
            and option.get('control', 'text') != 'section')


class encoder(json.JSONEncoder):
    """Serialise numpy values as plain JSON."""

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        return json.JSONEncoder.default(self, obj)


class config:

    def __init__(self, default={}):
        """Create config with a copy of each section in default."""
        self.__store = {sec: dict(default[sec]) for sec in default}
        self.__schema = {}

    def __repr__(self):
        return 'config({!r})'.format(self.__store)

    def add_section(self, section, schema=None):
        """Add section to config, optionally replacing its schema.

        Args:
            section (str): Section identifier.
            schema (dict, optional): Option descriptions for section.

        Returns:
            dict: Handle to config section dictionary.

        Raises:
            TypeError: If section key is not string.

        """
        if not isinstance(section, str):
            raise TypeError('Invalid section key: ' + repr(section))
        if schema is not None:
            self.__schema[section] = schema
        return self.__store.setdefault(section, {})

    def has_section(self, section):
        return section in self.__store

    def has_option(self, section, key):
        return key in self.__store.get(section, {})

    def sections(self):
        return iter(tuple(self.__store))

    def options(self, section):
        return iter(tuple(self.__store[section]))

    def get(self, section, key):
        return self.__store[section][key]

    def set(self, section, key, value):
        if not isinstance(key, str):
            raise TypeError('Invalid option key: ' + repr(key))
        self.__store[section][key] = value

    def _convert(self, section, key, otype, option, default):
        convert = _CONVERT.get(otype, _CONVERT['str'])[0]
        try:
            return convert(self.get(section, key), option)
        except (ValueError, TypeError, KeyError):
            return default

    def get_value(self, section, key):
        """Return the value of section:key typed by its schema.

        Unset or unconvertible options return the schema default.
        Keys outside the schema return the stored value as-is.
        """
        option = self.__schema.get(section, {}).get(key)
        if option is None:
            _log.debug('Requested value %r:%r not in schema', section, key)
            if self.has_option(section, key):
                return self.get(section, key)
            return None
        ret = option.get('default')
        if (_holds_value(option) and self.has_option(section, key)
                and self.get(section, key) is not None):
            ret = self._convert(section, key, option.get('type', 'str'),
                                option, ret)
        return ret

    def check_section(self, section):
        """Return a list of problems with values in section.

        Keys without a schema entry and values that do not convert
        to the schema type are reported.
        """
        if section not in self.__schema:
            _log.error('No schema for section check %r', section)
            return []
        schema = self.__schema[section]
        ret = []
        for key, val in self.__store.get(section, {}).items():
            if key not in schema:
                ret.append('unknown key {}:{}'.format(section, key))
                continue
            otype = schema[key].get('type', 'str')
            if val is None or otype not in _CONVERT:
                continue
            convert, label = _CONVERT[otype]
            try:
                convert(val, schema[key])
            except (ValueError, TypeError):
                ret.append('{} {}:{}={!r}'.format(label, section, key, val))
        return ret

    def export_dict(self, section):
        """Return the schema options of section with typed values."""
        if section not in self.__schema:
            _log.error('No schema for section export %r', section)
            return None
        return {
            key: self.get_value(section, key)
            for key, option in self.__schema[section].items()
            if _holds_value(option)
        }

    def import_csv(self, filename):
        """Import key,value rows from a recipe file."""
        with open(filename, encoding='utf-8', newline='') as f:
            self.import_rows(csv.reader(f))

    def import_csv_text(self, text):
        """Import key,value rows from recipe text, eg a packaged recipe."""
        self.import_rows(csv.reader(text.splitlines()))

    def import_rows(self, rows):
        section = None
        for r in rows:
            if len(r) < 2 or not r[0] or r[0].startswith('#'):
                continue
            key = r[0].strip()
            val = r[1].strip()
            if key.lower() == 'section':
                section = val
                self.add_section(section)
                _log.debug('CSV import set section to %r', section)
            elif section is None:
                _log.debug('CSV import key %r ignored, no section', key)
            else:
                self.set(section, key, val)

    def merge(self, otherconfig, section=None):
        """Merge values from otherconfig into self.

        With section, that section is created if required and all
        of its values copied. Without, only sections already present
        in self receive values.
        """
        if not isinstance(otherconfig, config):
            raise TypeError('Merge expects jsonconfig object.')
        if section is not None:
            targets = (section, )
            self.add_section(section)
        else:
            targets = [s for s in otherconfig.sections() if s in self.__store]
        for sec in targets:
            if otherconfig.has_section(sec):
                for opt in otherconfig.options(sec):
                    self.set(sec, opt, otherconfig.get(sec, opt))

    def read(self, file):
        """Read config from file."""
        self.addconf(json.load(file))

    def addconf(self, obj):
        """Add all sections and values from obj to self."""
        if not isinstance(obj, dict):
            raise TypeError('Configuration file is not dict: ' +
                            obj.__class__.__name__)
        for sec, values in obj.items():
            if not isinstance(values, dict):
                raise TypeError('Configuration section is not dict: ' +
                                values.__class__.__name__)
            self.add_section(sec).update(values)

    def load(self, filename):
        """Load configuration from filename, return True on success."""
        if not os.path.exists(filename):
            _log.debug('Load file %r not found', filename)
            return False
        try:
            with open(filename, mode='rb') as f:
                self.read(f)
        except Exception as e:
            _log.error('%s loading config: %s', e.__class__.__name__, e)
            return False
        _log.debug('Loaded from %r', filename)
        return True
