"""tutorkit: a self-hosted course assistant platform.

Builds a retrieval knowledge base from course resources and serves
question answering with provenance and abstention, flashcards, quizzes
with auto-grading, summaries, instructor grading reports, and homework
gating over an HTTP API with a companion web UI.
"""

__version__ = "0.1.0"
