/**
 * Entry points: generate-dataset | train | serve.
 *
 *   ts-node src/cli.ts generate-dataset --out data --per-class 60 --seed 7
 *   ts-node src/cli.ts train --data data --out model.json --epochs 10 --seed 7
 *   ts-node src/cli.ts serve --model model.json --port 8787
 */

import { generateDataset, loadDataset } from './dataset';
import { loadModel, saveModel, trainToy } from './model';
import { serve } from './server';

function argValue(argv: string[], flag: string, fallback?: string): string {
  const idx = argv.indexOf(flag);
  if (idx >= 0 && idx + 1 < argv.length) return argv[idx + 1];
  if (fallback !== undefined) return fallback;
  throw new Error(`missing required flag ${flag}`);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === 'generate-dataset') {
    const out = argValue(rest, '--out');
    const perClass = parseInt(argValue(rest, '--per-class', '60'), 10);
    const seed = parseInt(argValue(rest, '--seed', '7'), 10);
    generateDataset(out, perClass, seed);
    console.log(`wrote ${2 * perClass} images under ${out}`);
    return 0;
  }
  if (command === 'train') {
    const data = argValue(rest, '--data');
    const out = argValue(rest, '--out');
    const epochs = parseInt(argValue(rest, '--epochs', '10'), 10);
    const seed = parseInt(argValue(rest, '--seed', '7'), 10);
    const { samples, classes } = loadDataset(data);
    const outcome = await trainToy(samples, classes.length, epochs, seed);
    await saveModel(outcome, out);
    console.log(`holdout accuracy ${outcome.holdoutAccuracy.toFixed(4)}; model saved to ${out}`);
    return outcome.holdoutAccuracy >= 0.9 ? 0 : 3;
  }
  if (command === 'serve') {
    const modelPath = argValue(rest, '--model');
    const port = parseInt(argValue(rest, '--port', '8787'), 10);
    const trained = await loadModel(modelPath);
    await serve(trained, port);
    console.log(`serving ${trained.classes} classes on port ${port}`);
    return -1; // keep running
  }
  console.error(`unknown command: ${command ?? '(none)'}`);
  console.error('commands: generate-dataset | train | serve');
  return 1;
}

main()
  .then((code) => {
    if (code >= 0) process.exit(code);
  })
  .catch((err) => {
    console.error(`error: ${err.message}`);
    process.exit(2);
  });
