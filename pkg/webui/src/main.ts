// App shell: wires the API client to the render functions. One in-flight
// query per conversation; the dashboard refreshes analytics on a timer.

import { ApiClient, ApiError } from './api'
import {
  renderAnalytics,
  renderChatMessage,
  renderCodeAssist,
  renderErrorBubble,
  renderExecutionResult,
  renderFlashcards,
  renderGradeReport,
  renderQuiz,
  renderQuizResult,
  renderResourceTable,
  renderStudentMessage,
} from './render'
import type { AssessmentItem, CodePayload, GenerationPayload } from './types'

const ANALYTICS_POLL_MS = 15000

interface AppState {
  client: ApiClient
  courseId: string
  conversationId?: string
  busy: boolean
  quizItems: AssessmentItem[]
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

function setupTabs(): void {
  const buttons = Array.from(document.querySelectorAll<HTMLButtonElement>('nav button'))
  for (const button of buttons) {
    button.addEventListener('click', () => {
      for (const other of buttons) other.classList.toggle('active', other === button)
      for (const panel of document.querySelectorAll<HTMLElement>('main > section')) {
        panel.hidden = panel.id !== `tab-${button.dataset.tab}`
      }
    })
  }
}

async function sendChat(state: AppState, text: string): Promise<void> {
  if (state.busy || !text.trim()) return
  state.busy = true
  const log = byId<HTMLDivElement>('chat-log')
  log.appendChild(renderStudentMessage(text))
  try {
    const envelope = await state.client.query(state.courseId, text, state.conversationId)
    state.conversationId = envelope.conversationId
    log.appendChild(renderChatMessage(envelope))
    const attachment = envelope.attachment
    if (attachment && 'detectedLanguage' in attachment) {
      log.appendChild(
        renderCodeAssist(attachment, {
          onRun: (payload: CodePayload) => runCode(state, payload, log),
        }),
      )
    } else if (attachment && 'items' in attachment && attachment.items.length > 0) {
      mountQuiz(state, attachment)
    } else if (attachment && 'cards' in attachment && attachment.cards.length > 0) {
      byId('flashcard-deck').replaceChildren(renderFlashcards(attachment.cards))
    }
  } catch (error) {
    log.appendChild(
      renderErrorBubble(describe(error), () => {
        void sendChat(state, text)
      }),
    )
  } finally {
    state.busy = false
    log.scrollTop = log.scrollHeight
  }
}

async function runCode(state: AppState, payload: CodePayload, log: HTMLElement): Promise<void> {
  try {
    const result = await state.client.execute(payload.detectedLanguage, payload.code)
    log.appendChild(renderExecutionResult(result))
  } catch (error) {
    log.appendChild(renderErrorBubble(describe(error)))
  }
}

function mountQuiz(state: AppState, payload: GenerationPayload): void {
  state.quizItems = payload.items
  const host = byId<HTMLDivElement>('quiz-host')
  host.replaceChildren(
    renderQuiz(payload.items, {
      onSubmit: (answers) => void gradeQuiz(state, answers),
    }, payload.notice),
  )
}

async function gradeQuiz(state: AppState, answers: string[]): Promise<void> {
  const key = {
    questions: state.quizItems.map((item) => ({
      q: item.question,
      answer: item.answer,
      kind: item.kind === 'TrueFalse' ? 'TF' : item.kind === 'MultipleChoice' ? 'MC' : 'OPEN',
      options: item.options,
      explanation: item.explanation,
    })),
  }
  try {
    const report = await state.client.grade(state.courseId, key, {
      student: 'webui',
      answers,
    })
    byId('quiz-result').replaceChildren(renderQuizResult(report))
  } catch (error) {
    byId('quiz-result').replaceChildren(renderErrorBubble(describe(error)))
  }
}

async function refreshDashboard(state: AppState): Promise<void> {
  try {
    const [resourceList, analytics] = await Promise.all([
      state.client.resources(state.courseId),
      state.client.analytics(state.courseId),
    ])
    byId('resource-table').replaceChildren(
      renderResourceTable(resourceList.resources, {
        onToggle: (resourceId, patch) =>
          void state.client
            .patchResource(state.courseId, resourceId, patch)
            .then(() => refreshDashboard(state)),
      }),
    )
    byId('analytics-panel').replaceChildren(renderAnalytics(analytics))
  } catch (error) {
    if (error instanceof ApiError && error.status === 403) {
      byId('tab-instructor').replaceChildren(
        renderErrorBubble('Instructor token required for this view.'),
      )
      return
    }
    byId('analytics-panel').replaceChildren(renderErrorBubble(describe(error)))
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `Request failed (${error.status}): ${error.message}`
  return `Request failed: ${String(error)}`
}

function bootstrap(): void {
  setupTabs()
  const params = new URLSearchParams(window.location.search)
  const state: AppState = {
    client: new ApiClient(
      params.get('api') ?? 'http://localhost:8080',
      params.get('token') ?? 'student-token',
    ),
    courseId: params.get('course') ?? 'eco101',
    busy: false,
    quizItems: [],
  }

  const input = byId<HTMLTextAreaElement>('chat-input')
  byId<HTMLFormElement>('chat-form').addEventListener('submit', (event) => {
    event.preventDefault()
    const text = input.value
    input.value = ''
    void sendChat(state, text)
  })
  byId<HTMLButtonElement>('shortcut-quiz').addEventListener('click', () => {
    void sendChat(state, `make me a quiz about ${input.value || 'this week'}`)
  })
  byId<HTMLButtonElement>('shortcut-flashcards').addEventListener('click', () => {
    void sendChat(state, `flashcards about ${input.value || 'this week'}`)
  })
  byId<HTMLButtonElement>('shortcut-summarize').addEventListener('click', () => {
    void sendChat(state, `summarize ${input.value || 'this week'}`)
  })

  byId<HTMLFormElement>('grade-form').addEventListener('submit', (event) => {
    event.preventDefault()
    const keyText = byId<HTMLTextAreaElement>('grade-key').value
    const submissionText = byId<HTMLTextAreaElement>('grade-submission').value
    try {
      const key = JSON.parse(keyText)
      const submission = JSON.parse(submissionText)
      void state.client
        .grade(state.courseId, key, submission)
        .then((report) => byId('grade-result').replaceChildren(renderGradeReport(report)))
        .catch((error) => byId('grade-result').replaceChildren(renderErrorBubble(describe(error))))
    } catch {
      byId('grade-result').replaceChildren(renderErrorBubble('Key and submission must be valid JSON.'))
    }
  })

  byId<HTMLFormElement>('questions-form').addEventListener('submit', (event) => {
    event.preventDefault()
    const topic = byId<HTMLInputElement>('questions-topic').value
    const kind = byId<HTMLSelectElement>('questions-kind').value
    const count = Number(byId<HTMLInputElement>('questions-count').value || '5')
    void state.client
      .questions(state.courseId, topic, count, kind)
      .then((payload) => {
        const host = byId('questions-result')
        if (payload.notice) {
          host.replaceChildren(renderErrorBubble(payload.notice))
          return
        }
        host.replaceChildren(
          renderQuiz(payload.items, { onSubmit: () => undefined }, payload.notice),
        )
      })
      .catch((error) => byId('questions-result').replaceChildren(renderErrorBubble(describe(error))))
  })

  void refreshDashboard(state)
  window.setInterval(() => void refreshDashboard(state), ANALYTICS_POLL_MS)
}

if (typeof document !== 'undefined' && document.getElementById('chat-form')) {
  bootstrap()
}
