// Render-function unit tests: every displayed value must equal the server
// payload fed in; the UI computes nothing itself.

import { describe, expect, it, vi } from 'vitest'
import {
  renderAnalytics,
  renderChatMessage,
  renderCodeAssist,
  renderExecutionResult,
  renderFlashcards,
  renderGradeReport,
  renderQuiz,
  renderQuizResult,
  renderResourceTable,
} from '../src/render'
import type { AnswerEnvelope, AssessmentItem, Flashcard, GradeReport } from '../src/types'

function envelope(overrides: Partial<AnswerEnvelope>): AnswerEnvelope {
  return {
    text: 'an answer',
    confidencePct: 0,
    sources: [],
    abstained: false,
    autonomous: false,
    homeworkBlocked: false,
    disclaimer: '',
    ...overrides,
  }
}

describe('chat message states', () => {
  it('renders an abstained reply with uncertainty styling and no sources', () => {
    const node = renderChatMessage(
      envelope({ text: "I'm not sure.", abstained: true }),
    )
    expect(node.classList.contains('abstained')).toBe(true)
    expect(node.querySelector('.text')!.textContent).toContain("I'm not sure")
    expect(node.querySelector('.sources')).toBeNull()
    expect(node.querySelector('.confidence-badge')).toBeNull()
  })

  it('renders a normal answer with both source titles and the confidence badge', () => {
    const node = renderChatMessage(
      envelope({
        text: 'Energy flows from producers upward.',
        confidencePct: 81,
        disclaimer: 'Confidence: 81%. Sources: Lecture One, Reading Two.',
        sources: [
          { resourceId: 'r1', title: 'Lecture One', score: 0.81 },
          { resourceId: 'r2', title: 'Reading Two', score: 0.78 },
        ],
      }),
    )
    expect(node.classList.contains('answer')).toBe(true)
    const sourceText = node.querySelector('.sources')!.textContent!
    expect(sourceText).toContain('Lecture One')
    expect(sourceText).toContain('Reading Two')
    expect(node.querySelector('.confidence-badge')!.textContent).toBe('81%')
    expect(node.querySelector('.disclaimer')!.textContent).toContain('81%')
  })

  it('renders a blocked reply as a guidance card linking suggestions', () => {
    const node = renderChatMessage(
      envelope({
        text: 'I cannot answer this assignment directly.',
        homeworkBlocked: true,
        sources: [{ resourceId: 'lec-1', title: 'Energy Lecture', score: 0.4 }],
      }),
    )
    expect(node.classList.contains('blocked')).toBe(true)
    const card = node.querySelector('.guidance-card')!
    expect(card.textContent).toContain('Energy Lecture')
    expect(card.querySelector('[data-resource-id="lec-1"]')).not.toBeNull()
  })

  it('renders an autonomous reply with its advisory styling', () => {
    const node = renderChatMessage(
      envelope({ text: 'best effort', autonomous: true, disclaimer: 'consult an expert' }),
    )
    expect(node.classList.contains('autonomous')).toBe(true)
    expect(node.querySelector('.disclaimer')!.textContent).toContain('consult an expert')
  })
})

describe('flashcards', () => {
  const cards: Flashcard[] = [
    {
      front: 'True or False: decomposers recycle nutrients.',
      back: 'True',
      reasoning: 'Decomposers recycle nutrients back into the soil.',
      kind: 'TrueFalse',
      sourceResourceIds: ['lec-0'],
    },
  ]

  it('shows the front first and reveals answer plus reasoning on flip', () => {
    const deck = renderFlashcards(cards)
    const card = deck.querySelector<HTMLElement>('.flashcard')!
    const front = card.querySelector<HTMLElement>('.front')!
    const back = card.querySelector<HTMLElement>('.back')!
    expect(front.hidden).toBe(false)
    expect(back.hidden).toBe(true)
    card.click()
    expect(front.hidden).toBe(true)
    expect(back.hidden).toBe(false)
    expect(back.querySelector('.answer')!.textContent).toBe('True')
    expect(back.querySelector('.reasoning')!.textContent).toContain('recycle nutrients')
  })

  it('renders a notice for an empty deck', () => {
    const deck = renderFlashcards([], 'No material on that topic.')
    expect(deck.querySelector('.notice')!.textContent).toContain('No material')
  })
})

const quizItems: AssessmentItem[] = [
  {
    kind: 'TrueFalse',
    question: 'Water evaporates when heated?',
    options: [],
    answer: 'True',
    explanation: 'Heating drives evaporation.',
    topic: 'water',
    sourceResourceIds: [],
  },
  {
    kind: 'MultipleChoice',
    question: 'Pick the producer.',
    options: ['grass', 'wolf', 'fungus'],
    answer: 'grass',
    explanation: 'Producers photosynthesize.',
    topic: 'food webs',
    sourceResourceIds: [],
  },
]

describe('quiz form', () => {
  it('flags unanswered questions before submitting', () => {
    const onSubmit = vi.fn()
    const form = renderQuiz(quizItems, { onSubmit })
    document.body.appendChild(form)
    form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }))
    expect(onSubmit).not.toHaveBeenCalled()
    expect(form.querySelectorAll('.unanswered').length).toBe(2)
    form.remove()
  })

  it('submits answers in question order once complete', () => {
    const onSubmit = vi.fn()
    const form = renderQuiz(quizItems, { onSubmit })
    document.body.appendChild(form)
    form.querySelector<HTMLInputElement>('input[name="q0"][value="True"]')!.checked = true
    form.querySelector<HTMLInputElement>('input[name="q1"][value="grass"]')!.checked = true
    form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }))
    expect(onSubmit).toHaveBeenCalledWith(['True', 'grass'])
    form.remove()
  })

  it('renders per-question feedback with server band colors', () => {
    const report: GradeReport = {
      entries: [
        { question: 'q', studentAnswer: 'True', score: 10, explanation: 'Correct: as expected.', band: 'green', retriable: false },
        { question: 'q2', studentAnswer: 'wolf', score: 0, explanation: 'Incorrect: producers photosynthesize.', band: 'red', retriable: false },
      ],
      total: 10,
      maxTotal: 20,
    }
    const panel = renderQuizResult(report)
    const rows = panel.querySelectorAll('.graded')
    expect(rows[0].classList.contains('band-green')).toBe(true)
    expect(rows[0].querySelector('.verdict')!.textContent).toContain('Correct')
    expect(rows[1].classList.contains('band-red')).toBe(true)
    expect(rows[1].querySelector('.explanation')!.textContent).toContain('photosynthesize')
    expect(panel.querySelector('.total')!.textContent).toBe('Total: 10/20')
  })
})

describe('code assist', () => {
  it('enables Run Code only for runnable payloads', () => {
    const onRun = vi.fn()
    const runnable = renderCodeAssist(
      { detectedLanguage: 'python', code: 'print(1)', runnable: true, executorHint: 'python' },
      { onRun },
    )
    const button = runnable.querySelector<HTMLButtonElement>('.run-code')!
    expect(button.disabled).toBe(false)
    button.click()
    expect(onRun).toHaveBeenCalledOnce()

    const blocked = renderCodeAssist(
      { detectedLanguage: 'matlab', code: 'disp(1)', runnable: false, executorHint: '' },
      { onRun },
    )
    expect(blocked.querySelector<HTMLButtonElement>('.run-code')!.disabled).toBe(true)
    expect(blocked.querySelector('.hint')!.textContent).toContain('cannot be executed')
  })

  it('emphasizes stderr on nonzero exit', () => {
    const panel = renderExecutionResult({ stdout: '', stderr: 'boom', exitCode: 2 })
    expect(panel.querySelector('.stderr')!.classList.contains('emphasized')).toBe(true)
    expect(panel.querySelector('.exit-code')!.textContent).toBe('exit 2')
  })
})

describe('instructor dashboard pieces', () => {
  it('resource toggle emits a PATCH-shaped change', () => {
    const onToggle = vi.fn()
    const table = renderResourceTable(
      [
        { id: 'lec-1', kind: 'Lecture', title: 'Energy', enabled: true, protected: false, priorityTier: 1, updatedAt: '' },
      ],
      { onToggle },
    )
    document.body.appendChild(table)
    const box = table.querySelector<HTMLInputElement>('td.enabled input')!
    box.checked = false
    box.dispatchEvent(new Event('change'))
    expect(onToggle).toHaveBeenCalledWith('lec-1', { enabled: false })
    table.remove()
  })

  it('grade report table mirrors bands and total verbatim', () => {
    const report: GradeReport = {
      entries: [2, 4, 4, 6, 2, 7, 1, 7, 1, 7].map((score, i) => ({
        question: `q${i}`,
        studentAnswer: 'a',
        score,
        explanation: `explanation ${i}`,
        band: score <= 2 ? 'red' : score <= 5 ? 'yellow' : 'green',
        retriable: false,
      })),
      total: 41,
      maxTotal: 100,
    }
    const node = renderGradeReport(report)
    expect(node.querySelector('.total')!.textContent).toBe('Total Score: 41/100')
    const bands = Array.from(node.querySelectorAll('tr[data-band]')).map(
      (row) => row.getAttribute('data-band'),
    )
    expect(bands).toEqual([
      'red', 'yellow', 'yellow', 'green', 'red', 'green', 'red', 'green', 'red', 'green',
    ])
  })

  it('analytics panel shows the server abstention rate', () => {
    const panel = renderAnalytics({
      counts: { Query: 10, Abstention: 2 },
      abstentionRate: 2 / 12,
      homeworkBlocks: 0,
      latencyMs: { p50: 12, p95: 48 },
      eventCount: 12,
    })
    expect(panel.querySelector('.abstention-rate')!.textContent).toContain('16.7%')
    expect(panel.querySelector('.latency')!.textContent).toContain('p50 12ms')
  })
})
