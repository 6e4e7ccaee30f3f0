import json
import random

import pytest

from tutorkit.corpus import Resource, ResourceKind, bypass_or_parse
from tutorkit.embedding import HashEmbedder, embed_chunks
from tutorkit.llm import MockLLM, context_sentences
from tutorkit.retrieval import CourseIndex, EmbeddedChunk, SearchParams
from tutorkit.services import (
    AssessmentItem,
    Band,
    EchoExecutor,
    Flashcard,
    GradeReport,
    ItemKind,
    band_of,
    code_assist,
    generate_exam_questions,
    generate_flashcards,
    generate_quiz,
    grade_submission,
    load_grading_key,
    load_submission,
    report_to_dict,
    summarize_topic,
)

DIM = 64
EMBEDDER = HashEmbedder(dim=DIM)

LECTURE_SENTENCES = [
    "Photosynthesis converts light energy into chemical energy stored as glucose.",
    "Chlorophyll pigments absorb mostly red and blue wavelengths of light.",
    "Food webs trace how energy moves between producers and consumers.",
    "Decomposers recycle nutrients back into the soil for producers to reuse.",
    "The water cycle moves moisture through evaporation and precipitation.",
]

# Relaxed threshold: short topics against sentence-sized chunks produce
# moderate cosines under the bag-of-tokens test embedder.
TOPIC_PARAMS = SearchParams(threshold=0.15)


def build_course_index() -> CourseIndex:
    entries = []
    for i, sentence in enumerate(LECTURE_SENTENCES):
        resource = Resource(
            id=f"lec-{i}",
            course_id="eco101",
            kind=ResourceKind.LECTURE,
            title=f"Lecture {i + 1}",
            body=sentence,
        )
        for cv in embed_chunks(EMBEDDER, bypass_or_parse(resource)):
            entries.append(
                EmbeddedChunk(
                    chunk=cv.chunk,
                    vector=cv.vector,
                    resource_kind=resource.kind,
                    resource_title=resource.title,
                    priority_tier=resource.priority_tier,
                )
            )
    return CourseIndex("eco101", DIM, "hash-test", entries)


INDEX = build_course_index()
LLM = MockLLM()


class TestBandOf:
    def test_exhaustive_breakpoints(self):
        got = "".join(band_of(s).value[0] for s in range(11))
        assert got == "RRRYYYGGGGG"

    def test_boundary_values(self):
        assert band_of(2) is Band.RED
        assert band_of(5) is Band.YELLOW
        assert band_of(7) is Band.GREEN

    @pytest.mark.parametrize("bad", [-1, 11, 100])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(ValueError):
            band_of(bad)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            band_of(5.5)


class ScriptedGrader:
    """Returns scripted scores in order, as a grader provider would."""

    name = "scripted"

    def __init__(self, scores):
        self.scores = list(scores)
        self.calls = 0

    def complete(self, directive, context, user_text, params=None):
        score = self.scores[self.calls]
        self.calls += 1
        return f"Score: {score}/10. Scripted explanation for call {self.calls}."


class BrokenGrader:
    name = "broken"

    def complete(self, directive, context, user_text, params=None):
        return "I cannot grade this."


class CrashingGrader:
    name = "crashing"

    def complete(self, directive, context, user_text, params=None):
        raise RuntimeError("grader offline")


def open_item(i: int) -> AssessmentItem:
    return AssessmentItem(
        kind=ItemKind.OPEN_ENDED,
        question=f"Question {i}?",
        answer=f"Expected answer {i}.",
        explanation="Key answer.",
    )


class TestGradeSubmission:
    def test_true_false_case_insensitive(self):
        item = AssessmentItem(
            kind=ItemKind.TRUE_FALSE, question="Is water wet?", answer="True",
            explanation="It is.",
        )
        report = grade_submission([item], ["true"], MockLLM())
        assert report.entries[0].score == 10
        assert report.entries[0].band is Band.GREEN

    def test_true_false_wrong_answer_gets_explanation(self):
        item = AssessmentItem(
            kind=ItemKind.TRUE_FALSE, question="Q", answer="False",
            explanation="Because reasons.",
        )
        report = grade_submission([item], ["True"], MockLLM())
        assert report.entries[0].score == 0
        assert "Because reasons." in report.entries[0].explanation

    def test_multiple_choice_exact_match(self):
        item = AssessmentItem(
            kind=ItemKind.MULTIPLE_CHOICE, question="Pick", answer="b",
            explanation="b is right", options=["a", "b", "c"],
        )
        report = grade_submission([item], ["B"], MockLLM())
        assert report.entries[0].score == 10

    def test_scripted_scores_reproduce_banded_total(self):
        scores = [2, 4, 4, 6, 2, 7, 1, 7, 1, 7]
        items = [open_item(i) for i in range(10)]
        report = grade_submission(items, [f"answer {i}" for i in range(10)],
                                  ScriptedGrader(scores))
        assert report.total == 41
        assert report.max_total == 100
        assert [e.score for e in report.entries] == scores
        assert [e.band.value[0] for e in report.entries] == list("RYYGRGRGRG")

    def test_mismatched_answer_count_rejected(self):
        with pytest.raises(ValueError):
            grade_submission([open_item(0)], ["a", "b"], MockLLM())

    def test_unparsable_grader_output_scores_zero_retriable(self):
        report = grade_submission([open_item(0)], ["whatever"], BrokenGrader())
        entry = report.entries[0]
        assert entry.score == 0 and entry.retriable
        assert entry.band is Band.RED

    def test_crashing_grader_never_crashes_report(self):
        report = grade_submission([open_item(0)], ["whatever"], CrashingGrader())
        entry = report.entries[0]
        assert entry.score == 0 and entry.retriable
        assert "grader offline" in entry.explanation

    def test_total_is_sum_fuzzed(self):
        rng = random.Random(17)
        for _ in range(25):
            n = rng.randrange(1, 12)
            scores = [rng.randrange(0, 11) for _ in range(n)]
            report = grade_submission(
                [open_item(i) for i in range(n)],
                [f"a{i}" for i in range(n)],
                ScriptedGrader(scores),
            )
            assert report.total == sum(e.score for e in report.entries) == sum(scores)
            assert report.max_total == 10 * n

    def test_mock_grader_overlap_heuristic(self):
        item = AssessmentItem(
            kind=ItemKind.OPEN_ENDED, question="Q",
            answer="alpha beta gamma delta epsilon zeta eta theta iota kappa",
            explanation="ten key tokens",
        )
        report = grade_submission([item], ["alpha beta gamma unrelated filler"], MockLLM())
        assert report.entries[0].score == 3


class TestItemInvariants:
    def test_mc_answer_must_be_an_option(self):
        with pytest.raises(ValueError):
            AssessmentItem(
                kind=ItemKind.MULTIPLE_CHOICE, question="q", answer="missing",
                explanation="e", options=["a", "b", "c"],
            )

    def test_mc_needs_three_options(self):
        with pytest.raises(ValueError):
            AssessmentItem(
                kind=ItemKind.MULTIPLE_CHOICE, question="q", answer="a",
                explanation="e", options=["a", "b"],
            )

    def test_tf_answer_shape(self):
        with pytest.raises(ValueError):
            AssessmentItem(kind=ItemKind.TRUE_FALSE, question="q", answer="Yes",
                           explanation="e")

    def test_flashcard_nonempty_fields(self):
        with pytest.raises(ValueError):
            Flashcard(front="f", back="", reasoning="r", kind=ItemKind.OPEN_ENDED)


class TestGenerateFlashcards:
    def test_arity_and_invariants(self):
        result = generate_flashcards(
            INDEX, EMBEDDER, LLM, "photosynthesis light energy glucose", 3,
            params=TOPIC_PARAMS,
        )
        assert result.notice is None
        assert len(result.cards) == 3
        for card in result.cards:
            assert card.front and card.back and card.reasoning
            assert card.source_resource_ids

    def test_mixed_kinds_when_count_at_least_two(self):
        result = generate_flashcards(
            INDEX, EMBEDDER, LLM, "photosynthesis chlorophyll light energy", 4,
            params=TOPIC_PARAMS,
        )
        kinds = {card.kind for card in result.cards}
        assert ItemKind.TRUE_FALSE in kinds and ItemKind.OPEN_ENDED in kinds

    def test_no_material_notice(self):
        # Default 0.75 threshold: an unrelated topic never clears it.
        result = generate_flashcards(
            INDEX, EMBEDDER, LLM, "quantum chromodynamics lattice", 3,
        )
        assert result.cards == []
        assert result.notice is not None

    def test_no_fabrication_reasoning_from_corpus(self):
        result = generate_flashcards(
            INDEX, EMBEDDER, LLM, "food webs energy producers consumers", 3,
            params=TOPIC_PARAMS,
        )
        corpus = " ".join(LECTURE_SENTENCES)
        for card in result.cards:
            assert card.reasoning in corpus


class TestGenerateQuiz:
    def test_kinds_filter_tf_open(self):
        result = generate_quiz(
            INDEX, EMBEDDER, LLM, "photosynthesis chlorophyll light energy", 5,
            kinds=[ItemKind.TRUE_FALSE, ItemKind.OPEN_ENDED], params=TOPIC_PARAMS,
        )
        assert result.items
        assert {i.kind for i in result.items} <= {ItemKind.TRUE_FALSE, ItemKind.OPEN_ENDED}

    def test_multiple_choice_only(self):
        result = generate_quiz(
            INDEX, EMBEDDER, LLM, "photosynthesis chlorophyll light energy glucose", 4,
            kinds=[ItemKind.MULTIPLE_CHOICE], params=TOPIC_PARAMS,
        )
        assert result.items
        for item in result.items:
            assert item.kind is ItemKind.MULTIPLE_CHOICE
            assert item.answer in item.options
            assert len(item.options) >= 3

    def test_empty_context_notice(self):
        result = generate_quiz(INDEX, EMBEDDER, LLM, "zzz qqq xxx", 5)
        assert result.items == [] and result.notice is not None

    def test_count_validation(self):
        with pytest.raises(ValueError):
            generate_quiz(INDEX, EMBEDDER, LLM, "topic", 0)


class TestGenerateExamQuestions:
    def test_mandated_kind_mc(self):
        result = generate_exam_questions(
            INDEX, EMBEDDER, LLM, "photosynthesis chlorophyll light", 4,
            ItemKind.MULTIPLE_CHOICE, params=TOPIC_PARAMS,
        )
        assert all(i.kind is ItemKind.MULTIPLE_CHOICE for i in result.items)
        assert all(i.topic for i in result.items)
        assert all(i.source_resource_ids for i in result.items)

    def test_single_open_item_carries_model_answer(self):
        result = generate_exam_questions(
            INDEX, EMBEDDER, LLM, "water cycle evaporation moisture", 1,
            ItemKind.OPEN_ENDED, params=TOPIC_PARAMS,
        )
        assert len(result.items) == 1
        assert result.items[0].answer and result.items[0].explanation

    def test_zero_context_notice(self):
        result = generate_exam_questions(
            INDEX, EMBEDDER, LLM, "xyzzy plugh", 2, ItemKind.OPEN_ENDED,
        )
        assert result.items == [] and result.notice is not None


class TestSummarizeTopic:
    def test_summary_from_context_only(self):
        result = summarize_topic(
            INDEX, EMBEDDER, LLM, "photosynthesis chlorophyll light energy",
            params=TOPIC_PARAMS,
        )
        assert result.notice is None
        corpus = " ".join(LECTURE_SENTENCES)
        for sentence in context_sentences(result.text):
            assert sentence in corpus
        assert result.sources

    def test_disclaimer_has_confidence_percentage(self):
        result = summarize_topic(
            INDEX, EMBEDDER, LLM, "food webs energy producers", params=TOPIC_PARAMS
        )
        assert "Confidence:" in result.disclaimer and "%" in result.disclaimer

    def test_absent_topic_notice(self):
        result = summarize_topic(INDEX, EMBEDDER, LLM, "xylophone orchestra")
        assert result.text == "" and result.notice is not None


class TestCodeAssist:
    def test_fenced_matlab_block(self):
        payload = code_assist("How does this work?\n```matlab\nx = 1:10;\ndisp(x)\n```")
        assert payload.detected_language == "matlab"
        assert payload.code == "x = 1:10;\ndisp(x)"
        assert not payload.runnable  # matlab not in the default allowlist

    def test_untagged_python_by_keyword_signature(self):
        payload = code_assist("What does this do?\n```\ndef f():\n    return 1\n```")
        assert payload.detected_language == "python"
        assert payload.runnable

    def test_prose_without_code(self):
        payload = code_assist("Explain the engineering design process please.")
        assert payload.detected_language == "unknown"
        assert payload.code == ""
        assert not payload.runnable

    def test_extension_mention(self):
        payload = code_assist("My script.m file throws an error at line 3.")
        assert payload.detected_language == "matlab"

    def test_allowlist_controls_runnable(self):
        payload = code_assist(
            "```matlab\ndisp(1)\n```", allowlist=frozenset({"matlab"})
        )
        assert payload.runnable
        assert payload.executor_hint == "matlab"

    def test_echo_executor_contract(self):
        result = EchoExecutor().execute("python", "print(1)")
        assert result == {"stdout": "print(1)", "stderr": "", "exitCode": 0}


class TestGradingIO:
    def test_key_and_submission_round_trip(self):
        key = {
            "questions": [
                {"q": "Is rain part of the water cycle?", "answer": "True", "kind": "TF"},
                {"q": "Explain food webs.", "answer": "Energy flows between organisms.",
                 "kind": "OPEN"},
            ]
        }
        items = load_grading_key(key)
        assert items[0].kind is ItemKind.TRUE_FALSE
        assert items[1].kind is ItemKind.OPEN_ENDED
        student, answers = load_submission({"student": "s-9", "answers": ["True", "stuff"]})
        assert student == "s-9" and len(answers) == 2

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            load_grading_key({"questions": [{"q": "q", "answer": "a", "kind": "ESSAY"}]})

    def test_report_serialization(self):
        report = grade_submission(
            [open_item(0)], ["answer"], ScriptedGrader([7])
        )
        data = report_to_dict(report)
        assert data["total"] == 7 and data["maxTotal"] == 10
        assert data["entries"][0]["band"] == "green"
        json.dumps(data)  # must be JSON-serializable
