"""Bundled scenario files: crossing, exit_return, same_side."""
