/**
 * HTTP serving behind the classify wire protocol:
 *   GET  /health            -> 200 {"classes": n}
 *   POST /classify          -> 200 {"label": int, "scores": [...]}
 * Any malformed request body answers 400. Serving is stateless per request;
 * model weights are read-only once loaded.
 */

import express, { Express, NextFunction, Request, Response } from 'express';
import { decodeGrayPng } from './png';
import { TrainedModel, classifyValues } from './model';

export function createApp(trained: TrainedModel): Express {
  const app = express();
  app.use(express.json({ limit: '10mb' }));

  // body-parser JSON failures surface as errors; the protocol wants 400
  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (err) {
      res.status(400).json({ error: 'request body is not valid JSON' });
      return;
    }
    next();
  });

  app.get('/health', (_req, res) => {
    res.json({ classes: trained.classes });
  });

  app.post('/classify', (req, res) => {
    const body = req.body;
    if (!body || typeof body.image_png_b64 !== 'string') {
      res.status(400).json({ error: 'missing image_png_b64 field' });
      return;
    }
    let raw: Buffer;
    try {
      raw = Buffer.from(body.image_png_b64, 'base64');
      if (raw.length === 0) throw new Error('empty');
    } catch {
      res.status(400).json({ error: 'image_png_b64 is not valid base64' });
      return;
    }
    try {
      const img = decodeGrayPng(raw);
      const verdict = classifyValues(trained, img.values, img.width, img.height);
      res.json(verdict);
    } catch {
      res.status(400).json({ error: 'payload is not a decodable PNG' });
      return;
    }
  });

  return app;
}

export function translateListenError(err: NodeJS.ErrnoException, port: number): Error {
  if (err.code === 'EADDRINUSE') {
    return new Error(`port ${port} is already in use`);
  }
  return err;
}

export function serve(trained: TrainedModel, port: number): Promise<import('http').Server> {
  const app = createApp(trained);
  return new Promise((resolve, reject) => {
    const server = app.listen(port, () => resolve(server));
    server.on('error', (err: NodeJS.ErrnoException) => reject(translateListenError(err, port)));
  });
}
