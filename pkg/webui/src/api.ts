// Typed client for the course-assistant HTTP API. All state mutations in
// the UI flow through these calls; nothing is computed client-side.

import type {
  Analytics,
  AnswerEnvelope,
  ExecutionResult,
  GenerationPayload,
  GradeReport,
  ResourceRow,
  SummaryPayload,
} from './types'

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message)
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public token: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: {
        'Content-Type': 'application/json',
        Authorization: `Bearer ${this.token}`,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const text = await response.text()
    if (!response.ok) {
      let detail = text
      try {
        detail = JSON.parse(text).detail ?? text
      } catch {
        /* plain-text error body */
      }
      throw new ApiError(response.status, String(detail))
    }
    return JSON.parse(text) as T
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request('GET', '/healthz')
  }

  query(courseId: string, text: string, conversationId?: string, studentId?: string) {
    return this.request<AnswerEnvelope>('POST', `/courses/${courseId}/query`, {
      text,
      conversationId,
      studentId: studentId ?? 'webui',
    })
  }

  quiz(courseId: string, topic: string, count: number) {
    return this.request<GenerationPayload>('POST', `/courses/${courseId}/quiz`, {
      topic,
      count,
    })
  }

  flashcards(courseId: string, topic: string, count: number) {
    return this.request<GenerationPayload>('POST', `/courses/${courseId}/flashcards`, {
      topic,
      count,
    })
  }

  summarize(courseId: string, topic: string) {
    return this.request<SummaryPayload>('POST', `/courses/${courseId}/summarize`, { topic })
  }

  grade(courseId: string, key: unknown, submission: unknown) {
    return this.request<GradeReport>('POST', `/courses/${courseId}/grade`, {
      key,
      submission,
    })
  }

  questions(courseId: string, topic: string, count: number, kind: string) {
    return this.request<GenerationPayload>('POST', `/courses/${courseId}/questions`, {
      topic,
      count,
      kind,
    })
  }

  resources(courseId: string) {
    return this.request<{ resources: ResourceRow[] }>('GET', `/courses/${courseId}/resources`)
  }

  patchResource(courseId: string, resourceId: string, patch: { enabled?: boolean; protected?: boolean }) {
    return this.request<{ id: string; enabled: boolean; protected: boolean }>(
      'PATCH',
      `/courses/${courseId}/resources/${resourceId}`,
      patch,
    )
  }

  analytics(courseId: string) {
    return this.request<Analytics>('GET', `/courses/${courseId}/analytics`)
  }

  execute(language: string, code: string) {
    return this.request<ExecutionResult>('POST', '/execute', { language, code })
  }
}
