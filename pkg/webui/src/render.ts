// Pure DOM builders. Each function turns a server payload into elements;
// none of them compute scores, bands, or confidence locally, so a diff of
// rendered values against the API response is always empty.

import type {
  AnswerEnvelope,
  AssessmentItem,
  Analytics,
  CodePayload,
  ExecutionResult,
  Flashcard,
  GradeReport,
  ResourceRow,
} from './types'

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

export function renderSources(sources: AnswerEnvelope['sources']): HTMLElement {
  const list = el('ul', 'sources')
  for (const source of sources) {
    const item = el('li', 'source')
    item.textContent = `${source.title} (${(source.score * 100).toFixed(0)}%)`
    item.dataset.resourceId = source.resourceId
    list.appendChild(item)
  }
  return list
}

/** One chat bubble for an assistant reply, styled by envelope state. */
export function renderChatMessage(envelope: AnswerEnvelope): HTMLElement {
  const bubble = el('div', 'message assistant')
  if (envelope.abstained) {
    bubble.classList.add('abstained')
  } else if (envelope.homeworkBlocked) {
    bubble.classList.add('blocked')
  } else if (envelope.autonomous) {
    bubble.classList.add('autonomous')
  } else {
    bubble.classList.add('answer')
  }

  bubble.appendChild(el('p', 'text', envelope.text))

  if (envelope.homeworkBlocked) {
    const card = el('div', 'guidance-card')
    card.appendChild(el('strong', undefined, 'Try these course materials instead:'))
    card.appendChild(renderSources(envelope.sources))
    bubble.appendChild(card)
  } else if (!envelope.abstained) {
    if (envelope.sources.length > 0) {
      bubble.appendChild(renderSources(envelope.sources))
    }
    const disclaimer = el('p', 'disclaimer')
    const confidence = el('span', 'confidence-badge', `${envelope.confidencePct.toFixed(0)}%`)
    disclaimer.appendChild(confidence)
    disclaimer.appendChild(document.createTextNode(' ' + envelope.disclaimer))
    bubble.appendChild(disclaimer)
  }
  return bubble
}

export function renderStudentMessage(text: string): HTMLElement {
  const bubble = el('div', 'message student')
  bubble.appendChild(el('p', 'text', text))
  return bubble
}

/** Flip-card deck: front first, click toggles to back + reasoning. */
export function renderFlashcards(cards: Flashcard[], notice?: string | null): HTMLElement {
  const deck = el('div', 'flashcards')
  if (notice || cards.length === 0) {
    deck.appendChild(el('p', 'notice', notice ?? 'No flashcards available.'))
    return deck
  }
  cards.forEach((card, index) => {
    const node = el('div', 'flashcard')
    node.dataset.index = String(index)
    const front = el('div', 'front')
    front.appendChild(el('p', 'question', card.front))
    front.appendChild(el('p', 'hint', 'Click to reveal the answer'))
    const back = el('div', 'back')
    back.hidden = true
    back.appendChild(el('p', 'answer', card.back))
    back.appendChild(el('p', 'reasoning', card.reasoning))
    node.append(front, back)
    node.addEventListener('click', () => {
      front.hidden = !front.hidden
      back.hidden = !back.hidden
      node.classList.toggle('flipped')
    })
    deck.appendChild(node)
  })
  return deck
}

export interface QuizHandlers {
  onSubmit: (answers: string[]) => void
}

/** Quiz form; flags unanswered questions before submitting. */
export function renderQuiz(
  items: AssessmentItem[],
  handlers: QuizHandlers,
  notice?: string | null,
): HTMLElement {
  const form = el('form', 'quiz')
  if (notice || items.length === 0) {
    form.appendChild(el('p', 'notice', notice ?? 'No quiz available.'))
    return form
  }
  items.forEach((item, index) => {
    const block = el('fieldset', 'quiz-question')
    block.dataset.index = String(index)
    block.appendChild(el('legend', undefined, `${index + 1}. ${item.question}`))
    if (item.kind === 'TrueFalse') {
      for (const option of ['True', 'False']) {
        const label = el('label')
        const radio = el('input')
        radio.type = 'radio'
        radio.name = `q${index}`
        radio.value = option
        label.append(radio, document.createTextNode(' ' + option))
        block.appendChild(label)
      }
    } else if (item.kind === 'MultipleChoice') {
      item.options.forEach((option) => {
        const label = el('label')
        const radio = el('input')
        radio.type = 'radio'
        radio.name = `q${index}`
        radio.value = option
        label.append(radio, document.createTextNode(' ' + option))
        block.appendChild(label)
      })
    } else {
      const input = el('textarea') as HTMLTextAreaElement
      input.name = `q${index}`
      input.rows = 2
      block.appendChild(input)
    }
    form.appendChild(block)
  })
  const submit = el('button', 'submit', 'Submit answers')
  submit.type = 'submit'
  form.appendChild(submit)
  form.addEventListener('submit', (event) => {
    event.preventDefault()
    const answers: string[] = []
    let incomplete = false
    items.forEach((_, index) => {
      const data = new FormData(form)
      const value = (data.get(`q${index}`) ?? '').toString().trim()
      const block = form.querySelector(`fieldset[data-index="${index}"]`)!
      block.classList.toggle('unanswered', value === '')
      if (value === '') incomplete = true
      answers.push(value)
    })
    if (incomplete) return
    handlers.onSubmit(answers)
  })
  return form
}

/** Per-question feedback after grading, band colors straight from the server. */
export function renderQuizResult(report: GradeReport): HTMLElement {
  const panel = el('div', 'quiz-result')
  report.entries.forEach((entry, index) => {
    const row = el('div', `graded band-${entry.band}`)
    row.dataset.index = String(index)
    const verdict = entry.score === 10 ? 'Correct' : entry.score === 0 ? 'Incorrect' : 'Partially correct'
    row.appendChild(el('p', 'verdict', `${index + 1}. ${verdict} (${entry.score}/10)`))
    row.appendChild(el('p', 'explanation', entry.explanation))
    panel.appendChild(row)
  })
  panel.appendChild(el('p', 'total', `Total: ${report.total}/${report.maxTotal}`))
  return panel
}

export interface CodeHandlers {
  onRun: (payload: CodePayload) => void
}

/** Code block plus a Run Code button, enabled only for runnable payloads. */
export function renderCodeAssist(payload: CodePayload, handlers: CodeHandlers): HTMLElement {
  const panel = el('div', 'code-assist')
  panel.appendChild(el('p', 'language', `Language: ${payload.detectedLanguage}`))
  const pre = el('pre', 'code')
  pre.textContent = payload.code
  panel.appendChild(pre)
  const run = el('button', 'run-code', 'Run Code')
  run.type = 'button'
  run.disabled = !payload.runnable
  if (!payload.runnable) {
    panel.appendChild(el('p', 'hint', 'This language cannot be executed here.'))
  }
  run.addEventListener('click', () => handlers.onRun(payload))
  panel.appendChild(run)
  return panel
}

export function renderExecutionResult(result: ExecutionResult): HTMLElement {
  const panel = el('div', 'execution-result')
  panel.appendChild(el('pre', 'stdout', result.stdout))
  const stderr = el('pre', 'stderr', result.stderr)
  if (result.exitCode !== 0) stderr.classList.add('emphasized')
  panel.appendChild(stderr)
  panel.appendChild(el('p', 'exit-code', `exit ${result.exitCode}`))
  return panel
}

export interface DashboardHandlers {
  onToggle: (resourceId: string, patch: { enabled?: boolean; protected?: boolean }) => void
}

export function renderResourceTable(
  resources: ResourceRow[],
  handlers: DashboardHandlers,
): HTMLElement {
  const table = el('table', 'resources')
  const head = el('tr')
  for (const column of ['Title', 'Kind', 'Tier', 'Enabled', 'Protected']) {
    head.appendChild(el('th', undefined, column))
  }
  table.appendChild(head)
  for (const resource of resources) {
    const row = el('tr')
    row.dataset.resourceId = resource.id
    row.appendChild(el('td', 'title', resource.title))
    row.appendChild(el('td', 'kind', resource.kind))
    row.appendChild(el('td', 'tier', String(resource.priorityTier)))
    for (const flag of ['enabled', 'protected'] as const) {
      const cell = el('td', flag)
      const box = el('input') as HTMLInputElement
      box.type = 'checkbox'
      box.checked = resource[flag]
      box.addEventListener('change', () => {
        handlers.onToggle(resource.id, { [flag]: box.checked })
      })
      cell.appendChild(box)
      row.appendChild(cell)
    }
    table.appendChild(row)
  }
  return table
}

export function renderAnalytics(analytics: Analytics): HTMLElement {
  const panel = el('div', 'analytics')
  const counts = el('ul', 'counts')
  for (const [kind, count] of Object.entries(analytics.counts)) {
    counts.appendChild(el('li', undefined, `${kind}: ${count}`))
  }
  panel.appendChild(counts)
  panel.appendChild(
    el('p', 'abstention-rate', `Abstention rate: ${(analytics.abstentionRate * 100).toFixed(1)}%`),
  )
  panel.appendChild(
    el(
      'p',
      'latency',
      `Latency p50 ${analytics.latencyMs.p50.toFixed(0)}ms / p95 ${analytics.latencyMs.p95.toFixed(0)}ms`,
    ),
  )
  return panel
}

/** Color-banded grading table mirroring the report rows plus the total. */
export function renderGradeReport(report: GradeReport): HTMLElement {
  const wrap = el('div', 'grade-report')
  const table = el('table', 'grades')
  const head = el('tr')
  for (const column of ['#', 'Score', 'Band', 'Explanation']) {
    head.appendChild(el('th', undefined, column))
  }
  table.appendChild(head)
  report.entries.forEach((entry, index) => {
    const row = el('tr', `band-${entry.band}`)
    row.dataset.band = entry.band
    row.appendChild(el('td', 'index', String(index + 1)))
    row.appendChild(el('td', 'score', `${entry.score}/10`))
    row.appendChild(el('td', 'band', entry.band))
    row.appendChild(el('td', 'explanation', entry.explanation))
    table.appendChild(row)
  })
  wrap.appendChild(table)
  wrap.appendChild(el('p', 'total', `Total Score: ${report.total}/${report.maxTotal}`))
  return wrap
}

export function renderErrorBubble(message: string, onRetry?: () => void): HTMLElement {
  const bubble = el('div', 'message error')
  bubble.appendChild(el('p', 'text', message))
  if (onRetry) {
    const retry = el('button', 'retry', 'Retry')
    retry.type = 'button'
    retry.addEventListener('click', onRetry)
    bubble.appendChild(retry)
  }
  return bubble
}
