"""codeloop: code generation with planned web search, sandboxed execution,
and correctness-testing refinement, plus a Pass@K benchmark harness."""

__version__ = "0.1.0"
