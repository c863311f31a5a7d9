"""Repository-level prompt generation for black-box code completion models.

The package mines single-line completion holes from Java repositories,
composes candidate prompts from repository context (imports, siblings,
parent and child classes, similar-name files), trains a small selector
over those candidates, and evaluates completion success against a mock
or remote model endpoint.
"""

from __future__ import annotations

__version__ = "0.1.0"
