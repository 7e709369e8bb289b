"""Site-local clinical image collection, de-identification and curation toolkit."""

__version__ = "0.1.0"
