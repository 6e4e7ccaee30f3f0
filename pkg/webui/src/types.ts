// Wire types mirroring the server's JSON schemas. The UI renders these
// verbatim: every number and flag shown on screen originates server-side.

export interface SourceRef {
  resourceId: string
  title: string
  score: number
}

export interface AnswerEnvelope {
  text: string
  confidencePct: number
  sources: SourceRef[]
  abstained: boolean
  autonomous: boolean
  homeworkBlocked: boolean
  disclaimer: string
  conversationId?: string
  intent?: string
  attachment?: GenerationPayload | CodePayload
}

export interface Flashcard {
  front: string
  back: string
  reasoning: string
  kind: string
  sourceResourceIds: string[]
}

export interface AssessmentItem {
  kind: 'TrueFalse' | 'MultipleChoice' | 'OpenEnded'
  question: string
  options: string[]
  answer: string
  explanation: string
  topic: string
  sourceResourceIds: string[]
}

export interface GenerationPayload {
  cards: Flashcard[]
  items: AssessmentItem[]
  sources: SourceRef[]
  notice: string | null
}

export interface CodePayload {
  detectedLanguage: string
  code: string
  runnable: boolean
  executorHint: string
}

export interface SummaryPayload {
  text: string
  sources: SourceRef[]
  disclaimer: string
  notice: string | null
}

export type BandName = 'red' | 'yellow' | 'green'

export interface GradeEntry {
  question: string
  studentAnswer: string
  score: number
  explanation: string
  band: BandName
  retriable: boolean
}

export interface GradeReport {
  entries: GradeEntry[]
  total: number
  maxTotal: number
  student?: string
}

export interface ResourceRow {
  id: string
  kind: string
  title: string
  enabled: boolean
  protected: boolean
  priorityTier: number
  updatedAt: string
}

export interface Analytics {
  counts: Record<string, number>
  abstentionRate: number
  homeworkBlocks: number
  latencyMs: { p50: number; p95: number }
  eventCount: number
}

export interface ExecutionResult {
  stdout: string
  stderr: string
  exitCode: number
}
