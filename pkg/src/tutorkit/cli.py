"""Operator command line.

Everything runs offline by default: the hash embedder, the mock
completion provider, and the scripted speech provider need no network or
credentials, so `ingest` followed by `query` works on a fresh checkout.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config
from .conversation import Conversation
from .embedding import create_provider
from .errors import NotFoundError, TutorkitError
from .ingest import CanvasLms, FileFixtureLms, RemoteAsr, ScriptedAsr, sync_course, transcribe
from .llm import create_llm
from .pipeline import AssistantSettings, classify_query, envelope_to_dict, fulfill_intent
from .server import _result_to_envelope
from .services import (
    ItemKind,
    generate_exam_questions,
    grade_submission,
    load_grading_key,
    load_submission,
    report_to_dict,
)
from .store import FileStore


def _load_config(config_path: str | None, store: str | None) -> AppConfig:
    config = load_config(config_path) if config_path else AppConfig()
    if store:
        config.store_path = store
    return config


def _settings(config: AppConfig) -> AssistantSettings:
    return AssistantSettings(
        search=config.retrieval,
        homework_threshold=config.homework_threshold,
        autonomous_mode=config.autonomous_mode,
        context_budget_chars=config.context_budget_chars,
    )


@click.group()
def main() -> None:
    """Course assistant operations."""


@main.command()
@click.argument("source")
@click.option("--course", required=True, help="Course id to ingest into.")
@click.option("--store", default=None, help="Store directory (overrides config).")
@click.option("--config", "config_path", default=None, help="Config file path.")
@click.option("--lms-token", default=None, help="Bearer token for an LMS URL source.")
def ingest(source: str, course: str, store: str | None, config_path: str | None,
           lms_token: str | None) -> None:
    """Ingest a fixture directory or LMS URL into the store."""
    config = _load_config(config_path, store)
    try:
        if source.startswith(("http://", "https://")):
            lms = CanvasLms(source, lms_token or "")
        else:
            lms = FileFixtureLms(source)
        embedder = create_provider(config.embedding)
        report = sync_course(lms, course, FileStore(config.store_path), embedder)
    except TutorkitError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(report.to_dict()))
    if report.failed:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, help="Config file path.")
def serve(config_path: str) -> None:
    """Run the HTTP service."""
    from .server import serve as run_server

    try:
        config = load_config(config_path)
        run_server(config)
    except TutorkitError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.argument("text")
@click.option("--course", required=True, help="Course id to query.")
@click.option("--store", default=None, help="Store directory (overrides config).")
@click.option("--config", "config_path", default=None, help="Config file path.")
@click.option("--conversation", "conversation_id", default=None,
              help="Continue an existing conversation.")
@click.option("--student", default="cli", help="Student id for the conversation.")
def query(text: str, course: str, store: str | None, config_path: str | None,
          conversation_id: str | None, student: str) -> None:
    """Ask the assistant one question; prints the envelope JSON."""
    config = _load_config(config_path, store)
    file_store = FileStore(config.store_path)
    index = file_store.load_course_index(course)
    if index is None:
        raise click.ClickException(f"course {course!r} not found; run ingest first")
    embedder = create_provider(config.embedding)
    llm = create_llm(config.llm)

    conversation = None
    if conversation_id:
        conversation = file_store.load_conversation(course, conversation_id)
    if conversation is None:
        conversation = Conversation.new(course, student_id=student,
                                        token_budget=config.token_budget,
                                        conversation_id=conversation_id)

    classified = classify_query(text, conversation)
    from .conversation import append_turn

    append_turn(conversation, "student", text, llm)
    result = fulfill_intent(index, embedder, llm, classified, text,
                            conversation=conversation, settings=_settings(config))
    envelope, attachment = _result_to_envelope(result)
    append_turn(conversation, "assistant", envelope.text or "(no reply)", llm)
    file_store.save_conversation(conversation)

    payload = envelope_to_dict(envelope)
    payload["conversationId"] = conversation.id
    payload["intent"] = classified.intent.value
    if attachment is not None:
        payload["attachment"] = attachment
    click.echo(json.dumps(payload, ensure_ascii=False))
    if envelope.abstained:
        sys.exit(2)


@main.command()
@click.argument("url")
@click.option("--timestamps/--no-timestamps", default=True)
@click.option("--diarize", is_flag=True, default=False)
@click.option("--config", "config_path", default=None, help="Config file path.")
def transcribe_cmd(url: str, timestamps: bool, diarize: bool,
                   config_path: str | None) -> None:
    """Transcribe media from a URL or local path; prints segments JSON."""
    config = _load_config(config_path, None)
    asr_config = dict(config.asr)
    if asr_config.get("provider", "scripted") == "remote-http":
        asr = RemoteAsr(asr_config.get("endpoint", ""))
    else:
        asr = ScriptedAsr()
    try:
        segments = transcribe(asr, url, with_timestamps=timestamps, diarize=diarize)
    except TutorkitError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(
        [
            {"start": s.start_s, "end": s.end_s, "speaker": s.speaker, "text": s.text}
            for s in segments
        ],
        ensure_ascii=False,
    ))


main.add_command(transcribe_cmd, name="transcribe")


@main.command()
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--submission", "submission_path", required=True,
              type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, help="Config file path.")
def grade(key_path: str, submission_path: str, config_path: str | None) -> None:
    """Grade a submission against a key; prints the report JSON."""
    config = _load_config(config_path, None)
    llm = create_llm(config.llm)
    try:
        items = load_grading_key(json.loads(Path(key_path).read_text(encoding="utf-8")))
        student, answers = load_submission(
            json.loads(Path(submission_path).read_text(encoding="utf-8"))
        )
        report = grade_submission(items, answers, llm)
    except (ValueError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc))
    payload = report_to_dict(report)
    payload["student"] = student
    click.echo(json.dumps(payload, ensure_ascii=False))


@main.command()
@click.option("--course", required=True)
@click.option("--topic", required=True)
@click.option("--kind", default="MC", help="TF, MC, or OPEN.")
@click.option("--count", default=5, type=int)
@click.option("--store", default=None, help="Store directory (overrides config).")
@click.option("--config", "config_path", default=None, help="Config file path.")
def questions(course: str, topic: str, kind: str, count: int, store: str | None,
              config_path: str | None) -> None:
    """Generate assessment questions for instructor review."""
    config = _load_config(config_path, store)
    file_store = FileStore(config.store_path)
    index = file_store.load_course_index(course)
    if index is None:
        raise click.ClickException(f"course {course!r} not found; run ingest first")
    kind_map = {"TF": ItemKind.TRUE_FALSE, "MC": ItemKind.MULTIPLE_CHOICE,
                "OPEN": ItemKind.OPEN_ENDED}
    item_kind = kind_map.get(kind.upper())
    if item_kind is None:
        try:
            item_kind = ItemKind(kind)
        except ValueError:
            raise click.ClickException(f"unknown kind {kind!r}; use TF, MC, or OPEN")
    embedder = create_provider(config.embedding)
    llm = create_llm(config.llm)
    result = generate_exam_questions(
        index, embedder, llm, topic, count, item_kind,
        params=config.retrieval, context_budget=config.context_budget_chars,
    )
    click.echo(json.dumps(
        {
            "items": [
                {
                    "kind": i.kind.value,
                    "question": i.question,
                    "options": i.options,
                    "answer": i.answer,
                    "explanation": i.explanation,
                    "topic": i.topic,
                    "sourceResourceIds": i.source_resource_ids,
                }
                for i in result.items
            ],
            "notice": result.notice,
        },
        ensure_ascii=False,
    ))


if __name__ == "__main__":
    main()
