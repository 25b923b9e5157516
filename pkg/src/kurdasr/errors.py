"""Shared exception base for the toolkit.

Every module-specific error derives from :class:`KurdasrError` so the CLI can
catch the whole family and map it to a categorized exit status.
"""


class KurdasrError(Exception):
    pass
