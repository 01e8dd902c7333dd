#!/usr/bin/env python3

"""
In-tree PEP 517 build backend and developer task runner.

    ./do.py [-v|-q] wheel [pip args...]
    ./do.py [-v|-q] test [pytest args...]
    ./do.py [-v|-q] simulate [nmgsim simulate args...]
"""

from __future__ import annotations

import os
import stat
import sys
import tempfile
import tomllib

from base64 import urlsafe_b64encode as base64url_encode
from csv import Dialect, QUOTE_MINIMAL, writer as csv_writer
from datetime import datetime as DateTime, UTC
from functools import update_wrapper
from hashlib import sha256
from io import StringIO
from itertools import product
from pathlib import Path, PurePosixPath
from zipfile import ZipFile, ZipInfo, ZIP_DEFLATED

from packaging.requirements import Requirement
from packaging.utils import canonicalize_name
from packaging.version import Version

from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from collections.abc import Callable, Sequence
    from hashlib import _Hash as Hash
    from os import PathLike
    from typing import Any


PROJECT_PATH = Path(__file__).parent
SRC_PATH = PROJECT_PATH / 'src'
TESTS_PATH = PROJECT_PATH / 'tests'

PYPROJECT_PATH = PROJECT_PATH / 'pyproject.toml'
PYPROJECT = tomllib.load(PYPROJECT_PATH.open(mode='rb')) if PYPROJECT_PATH.exists() else {}
PROJECT = PYPROJECT.get('project', {})
PROJECT_NAME = PROJECT.get('name') or PROJECT_PATH.resolve().name
PROJECT_VERSION = str(Version(PROJECT['version']))
PROJECT_TAG = PROJECT.get('tag', 'py3-none-any')
PROJECT_SUMMARY = PROJECT.get('description') or None
PROJECT_REQUIRES_PYTHON = PROJECT.get('requires-python') or None
PROJECT_DEPENDENCIES = [Requirement(r) for r in PROJECT.get('dependencies', [])]
PROJECT_EXTRAS = {
    canonicalize_name(extra): [Requirement(r) for r in requirements]
    for extra, requirements in PROJECT.get('optional-dependencies', {}).items()
}
PROJECT_SCRIPTS: dict[str, str] = PROJECT.get('scripts', {})

DIST_NAME = canonicalize_name(PROJECT_NAME).replace('-', '_')


def _get_readme(source: dict[str, str] | str | None) -> tuple[str | None, str | None]:
    match source:
        case {'file': str(name), 'content-type': str(content_type)}:
            path = PROJECT_PATH / name
        case {'text': str(text), 'content-type': str(content_type)}:
            return text, content_type
        case str(name):
            path = PROJECT_PATH / name
            match path.suffix.lower():
                case '.md':
                    content_type = 'text/markdown; variant=gfm'
                case '.rst':
                    content_type = 'text/x-rst'
                case _:
                    content_type = 'text/plain'
        case None:
            return None, None
        case _:
            raise ValueError("invalid readme entry")

    if 'charset=' not in content_type:
        content_type += '; charset=utf-8'
    return path.read_text(encoding='utf-8'), content_type


PROJECT_DESCRIPTION, PROJECT_DESCRIPTION_CONTENT_TYPE = _get_readme(PROJECT.get('readme'))

METADATA = [
    ('Metadata-Version', '2.1'),
    ('Name', PROJECT_NAME),
    ('Version', PROJECT_VERSION),
    *([('Summary', PROJECT_SUMMARY)] if PROJECT_SUMMARY else []),
    *([('Requires-Python', PROJECT_REQUIRES_PYTHON)] if PROJECT_REQUIRES_PYTHON else []),
    *(('Requires-Dist', str(r)) for r in PROJECT_DEPENDENCIES),
    *(
        entry
        for extra, requirements in PROJECT_EXTRAS.items()
        for entry in [
            ('Provides-Extra', extra),
            *(
                ('Requires-Dist', f'{r}; extra == "{extra}"' if not r.marker
                 else f'{r.name}{r.specifier}; ({r.marker}) and extra == "{extra}"')
                for r in requirements
            ),
        ]
    ),
    *(
        [('Description-Content-Type', PROJECT_DESCRIPTION_CONTENT_TYPE)]
        if PROJECT_DESCRIPTION_CONTENT_TYPE
        else []
    ),
]

WHEEL = [
    ('Wheel-Version', '1.0'),
    ('Generator', f'{PROJECT_NAME}/{Path(__file__).name}'),
    ('Root-Is-Purelib', 'true'),
    *(('Tag', '-'.join(m)) for m in product(*(p.split('.') for p in PROJECT_TAG.split('-')))),
]

DIST_INFO_NAME = f'{DIST_NAME}-{PROJECT_VERSION}.dist-info'
WHEEL_FILENAME = f'{DIST_NAME}-{PROJECT_VERSION}-{PROJECT_TAG}.whl'

# every archive entry carries this timestamp so that rebuilding yields identical wheels
ZIP_TIMESTAMP = DateTime.fromtimestamp(int(os.environ.get('SOURCE_DATE_EPOCH', 315532800)), tz=UTC)


def _banner(title: str, **values: Any) -> None:
    print(file=sys.stderr)
    print(title, file=sys.stderr)
    print('=' * len(title), file=sys.stderr)
    for name, value in values.items():
        print(f"{name} = {value!r}", file=sys.stderr)
    sys.stderr.flush()


def prepare_metadata_for_build_wheel(
    metadata_directory: PathLike[str] | str,
    config_settings: dict[str, str] | None = None,
    **_kwargs: dict[str, str],
) -> str:
    metadata_directory = Path(metadata_directory)
    _banner(
        "prepare_metadata_for_build_wheel",
        metadata_directory=metadata_directory,
        config_settings=config_settings,
    )
    assert not _kwargs

    dist_info_path = metadata_directory / DIST_INFO_NAME
    dist_info_path.mkdir()

    (dist_info_path / 'WHEEL').write_text(
        '\n'.join(f'{k}: {v}' for k, v in WHEEL) + '\n', encoding='utf-8', newline='\r\n'
    )

    (dist_info_path / 'METADATA').write_text(
        '\n'.join(f'{k}: {v}' for k, v in METADATA)
        + '\n'
        + ('\n' + PROJECT_DESCRIPTION if PROJECT_DESCRIPTION else ''),
        encoding='utf-8',
        newline='\r\n',
    )

    if PROJECT_SCRIPTS:
        (dist_info_path / 'entry_points.txt').write_text(
            '[console_scripts]\n'
            + ''.join(f'{name} = {target}\n' for name, target in PROJECT_SCRIPTS.items()),
            encoding='utf-8',
        )

    return DIST_INFO_NAME


prepare_metadata_for_build_editable = prepare_metadata_for_build_wheel


class Wheel(ZipFile):
    class __RecordDialect(Dialect):
        delimiter = ','
        doublequote = False
        escapechar = '\\'
        lineterminator = '\n'
        quotechar = '"'
        quoting = QUOTE_MINIMAL
        skipinitialspace = True
        strict = True

    def __init__(self, path: PathLike[str] | str, **kwargs: Any) -> None:
        super().__init__(
            path, mode='x', compression=ZIP_DEFLATED, allowZip64=True, compresslevel=8, **kwargs
        )
        self.__dist_info: list[tuple[PurePosixPath, bytes]] = []
        self.__record: dict[PurePosixPath, tuple[Hash, int]] = {}

    def make_zipinfo(self, path: PurePosixPath, *, directory: bool = False) -> ZipInfo:
        assert not path.is_absolute()
        typ, mode = (stat.S_IFDIR, 0o755) if directory else (stat.S_IFREG, 0o644)
        zinfo = ZipInfo(
            path.as_posix() + ('/' if directory else ''),
            date_time=ZIP_TIMESTAMP.timetuple()[:6],
        )
        zinfo.create_system = 3
        zinfo.external_attr = (typ | mode) << 16 | (0x10 if directory else 0)
        match typ:
            case stat.S_IFDIR:
                zinfo.CRC = 0
            case stat.S_IFREG:
                zinfo.compress_type = self.compression
                zinfo._compresslevel = self.compresslevel
        return zinfo

    def add_bytes(self, path: PurePosixPath | str, content: bytes) -> None:
        path = PurePosixPath(path)
        if path.parts[0].endswith('.dist-info'):
            self.__dist_info.append((path, content))
            return
        with self.open(self.make_zipinfo(path), 'w') as dst:
            dst.write(content)
        self.__record[path] = sha256(content), len(content)

    def add_tree(self, root: PurePosixPath | str, tree: PathLike[str] | str) -> None:
        """Add the files below `tree` under `root`, sorted, without caches."""

        root = PurePosixPath(root)
        tree = Path(tree)
        paths = sorted(
            (path for path in tree.rglob('*') if path.is_file() and not path.is_symlink()),
            key=lambda path: path.relative_to(tree).as_posix().casefold(),
        )
        for path in paths:
            rel = path.relative_to(tree)
            if '__pycache__' in rel.parts or path.suffix in ('.pyc', '.pyo'):
                continue
            self.add_bytes(root / rel.as_posix(), path.read_bytes())

    def close(self) -> None:
        if self.fp is None:
            return

        for path, content in self.__dist_info:
            with self.open(self.make_zipinfo(path), 'w') as dst:
                dst.write(content)
            self.__record[path] = sha256(content), len(content)

        with StringIO(newline='\n') as record:
            writer = csv_writer(record, dialect=self.__RecordDialect)
            for path, (hash, size) in self.__record.items():
                digest = base64url_encode(hash.digest()).decode('ascii').rstrip('=')
                writer.writerow((path, f'{hash.name}={digest}', size))

            path = PurePosixPath(DIST_INFO_NAME) / 'RECORD'
            writer.writerow((path, None, None))
            with self.open(self.make_zipinfo(path), 'w') as dst:
                dst.write(record.getvalue().encode('utf-8'))

        super().close()


def _build_wheel(
    wheel_directory: PathLike[str] | str,
    config_settings: dict[str, str] | None = None,
    metadata_directory: PathLike[str] | str | None = None,
    editable: bool = False,
) -> str:
    wheel_directory = Path(wheel_directory)
    _banner(
        "_build_wheel",
        wheel_directory=wheel_directory,
        config_settings=config_settings,
        metadata_directory=metadata_directory,
        editable=editable,
    )

    with tempfile.TemporaryDirectory() as scratch:
        if metadata_directory is None:
            metadata_directory = Path(scratch) / prepare_metadata_for_build_wheel(scratch)
        metadata_directory = Path(metadata_directory)

        with Wheel(wheel_directory / WHEEL_FILENAME) as f:
            if editable:
                f.add_bytes(f'{DIST_NAME}.pth', f'{SRC_PATH.resolve()}\n'.encode('utf-8'))
            else:
                f.add_tree('.', SRC_PATH)
            f.add_tree(DIST_INFO_NAME, metadata_directory)

    return WHEEL_FILENAME


def build_wheel(
    wheel_directory: PathLike[str] | str,
    config_settings: dict[str, str] | None = None,
    metadata_directory: PathLike[str] | str | None = None,
    **_kwargs: dict[str, str],
) -> str:
    assert not _kwargs
    return _build_wheel(
        wheel_directory,
        config_settings=config_settings,
        metadata_directory=metadata_directory,
        editable=False,
    )


def build_editable(
    wheel_directory: PathLike[str] | str,
    config_settings: dict[str, str] | None = None,
    metadata_directory: PathLike[str] | str | None = None,
    **_kwargs: dict[str, str],
) -> str:
    assert not _kwargs
    return _build_wheel(
        wheel_directory,
        config_settings=config_settings,
        metadata_directory=metadata_directory,
        editable=True,
    )


def build_sdist(
    sdist_directory: PathLike[str] | str,
    config_settings: dict[str, str] | None = None,
    **_kwargs: dict[str, str],
):
    _banner("build_sdist", sdist_directory=sdist_directory, config_settings=config_settings)
    assert not _kwargs
    raise NotImplementedError("sdists are not supported, build a wheel")


def digest_args(f: Callable[..., int]) -> Callable[[], int]:
    def _f(args: Sequence[str] | None = None, progname: str | None = None) -> int:
        args: list[str] = sys.argv[1:] if args is None else list(args)
        help = f"{progname or sys.argv[0]} [-h|--help] [-V|--version] [-v|-q] <command> [args...]"
        remaining: list[str] = []
        verbosity = 0

        while args:
            if len(args[0]) > 2 and args[0][0] == '-' and not remaining:
                if args[0][1] != '-':
                    args[:1] = args[0][:2], '-' + args[0][2:]
                elif '=' in args[0][3:]:
                    args[:1] = args[0].split('=', maxsplit=1)

            match args:
                case [arg, *rest] if remaining:
                    # everything after the command belongs to the command
                    remaining.append(arg)
                    args = rest
                case ['--help', *_] | ['-h', *_]:
                    print(help, flush=True)
                    raise SystemExit(0)
                case ['--version', *_] | ['-V', *_]:
                    print(PROJECT_NAME, PROJECT_VERSION, flush=True)
                    raise SystemExit(0)
                case ['--verbose', *args] | ['-v', *args]:
                    verbosity += 1
                case ['--quiet', *args] | ['-q', *args]:
                    verbosity -= 1
                case ['--', *args]:
                    remaining.extend(args)
                    break
                case [arg, *args]:
                    if arg.startswith('-'):
                        print(f"ERROR: unrecognized option {arg!r}", flush=True, file=sys.stderr)
                        raise SystemExit(2)
                    remaining.append(arg)

        if not remaining:
            print("ERROR: missing command", flush=True, file=sys.stderr)
            print(help, flush=True, file=sys.stderr)
            raise SystemExit(2)

        return f(remaining[0], *remaining[1:], verbosity=verbosity)

    return update_wrapper(_f, f, assigned=('__doc__', '__name__', '__qualname__', '__module__'))


def _verbosity_flags(verbosity: int) -> list[str]:
    if verbosity > 0:
        return ['-' + 'v' * verbosity]
    if verbosity < 0:
        return ['-' + 'q' * -verbosity]
    return []


@digest_args
def do(cmd: str, *args: str, verbosity: int = 0) -> int:

    match cmd:
        case 'wheel':
            from pip._internal.commands import create_command

            command = create_command('wheel', isolated=True)
            return command.main([
                '--use-pep517',
                '--isolated',
                *_verbosity_flags(verbosity),
                '--no-input',
                '--disable-pip-version-check',
                *args,
                '--',
                str(PROJECT_PATH),
            ])

        case 'test':
            import pytest

            sys.path.insert(0, str(SRC_PATH.resolve()))
            return int(pytest.main([*_verbosity_flags(verbosity), *args, str(TESTS_PATH)]))

        case 'simulate':
            sys.path.insert(0, str(SRC_PATH.resolve()))
            from nmgsim.cli import main

            return main([*_verbosity_flags(verbosity), 'simulate', *args])

        case _:
            print(f"ERROR: unknown command {cmd!r}", flush=True, file=sys.stderr)
            return 2


if __name__ == '__main__':
    raise SystemExit(do())
