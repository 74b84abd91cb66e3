"""Regenerate the packaged scenario fixture files in place."""

from . import write_fixture_files

if __name__ == "__main__":
    for path in write_fixture_files():
        print(path)
