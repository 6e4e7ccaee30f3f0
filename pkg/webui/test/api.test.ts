// API client unit tests over a mocked fetch: auth header, payload shapes,
// and error surfacing.

import { afterEach, describe, expect, it, vi } from 'vitest'
import { ApiClient, ApiError } from '../src/api'

function mockFetch(status: number, body: unknown) {
  const impl = vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    text: async () => JSON.stringify(body),
  }))
  vi.stubGlobal('fetch', impl)
  return impl
}

afterEach(() => {
  vi.unstubAllGlobals()
})

describe('ApiClient', () => {
  it('sends the bearer token and JSON body', async () => {
    const impl = mockFetch(200, { status: 'ok', version: '0.1.0' })
    const client = new ApiClient('http://api.test', 'tok-1')
    await client.query('eco101', 'hello', 'conv-1', 's-1')
    expect(impl).toHaveBeenCalledOnce()
    const [url, options] = impl.mock.calls[0] as unknown as [string, RequestInit]
    expect(url).toBe('http://api.test/courses/eco101/query')
    expect((options.headers as Record<string, string>).Authorization).toBe('Bearer tok-1')
    expect(JSON.parse(options.body as string)).toEqual({
      text: 'hello',
      conversationId: 'conv-1',
      studentId: 's-1',
    })
  })

  it('raises ApiError with the server detail on failures', async () => {
    mockFetch(403, { detail: 'instructor role required' })
    const client = new ApiClient('http://api.test', 'student')
    await expect(client.resources('eco101')).rejects.toMatchObject({
      status: 403,
      message: 'instructor role required',
    })
    await expect(client.resources('eco101')).rejects.toBeInstanceOf(ApiError)
  })

  it('omits the body for GET requests', async () => {
    const impl = mockFetch(200, { resources: [] })
    await new ApiClient('http://api.test', 't').resources('eco101')
    const [, options] = impl.mock.calls[0] as unknown as [string, RequestInit]
    expect(options.body).toBeUndefined()
  })
})
