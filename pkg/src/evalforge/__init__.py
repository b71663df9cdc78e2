"""Config-driven LLM evaluation pipelines over remote inference backends."""

__version__ = "0.1.0"
