/**
 * DOM wiring: renders the controller state and forwards user input.
 *
 * Everything shown is a straight copy of service responses; the only
 * client-side logic is form validation and the conflict-refresh flow,
 * both of which live in the controller.
 */

import { ApiClient } from './api.js';
import { ConsoleState, SessionController } from './controller.js';
import {
  formatAccuracy,
  formatClassChoice,
  formatPercent,
  formatProgress,
  isImageReference,
} from './format.js';
import { attachHotkeys } from './hotkeys.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderSetup(root: HTMLElement, controller: SessionController, state: ConsoleState): void {
  const form = el('form', 'setup');
  form.append(el('h1', undefined, 'modelpick labeling console'));

  const addField = (label: string, input: HTMLInputElement | HTMLSelectElement) => {
    const row = el('label', 'field', label + ' ');
    input.name = label;
    row.append(input);
    form.append(row);
    return input;
  };

  const baseUrl = addField('service', el('input')) as HTMLInputElement;
  baseUrl.value = localStorage.getItem('modelpick.baseUrl') ?? 'http://127.0.0.1:8000';
  const collection = addField('collection', el('input')) as HTMLInputElement;
  const budget = addField('budget', el('input')) as HTMLInputElement;
  budget.type = 'number';
  budget.min = '1';
  budget.value = '25';
  const seed = addField('seed (blank = random)', el('input')) as HTMLInputElement;
  const epsilon = addField('epsilon', el('input')) as HTMLInputElement;
  epsilon.value = '0.4';
  const measure = addField('scoring measure', el('select')) as HTMLSelectElement;
  for (const mode of ['frequency', 'posterior']) {
    measure.append(new Option(mode, mode));
  }

  const submit = el('button', undefined, 'start session');
  submit.type = 'submit';
  form.append(submit);
  if (state.error) form.append(el('p', 'error', state.error));

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    localStorage.setItem('modelpick.baseUrl', baseUrl.value);
    const req = {
      collection: collection.value.trim(),
      budget: Number(budget.value),
      seed: seed.value.trim() === '' ? undefined : Number(seed.value),
      policy: {
        name: 'model_selector',
        epsilon: Number(epsilon.value),
        class_mode: measure.value,
      },
    };
    controller.api = new ApiClient(baseUrl.value);
    void controller.start(req);
  });
  root.append(form);
}

function renderLeaderboard(state: ConsoleState): HTMLElement {
  const table = el('table', 'leaderboard');
  const head = el('tr');
  for (const col of ['model', 'labeled accuracy', 'posterior']) {
    head.append(el('th', undefined, col));
  }
  table.append(head);
  for (const row of state.leaderboard) {
    const tr = el('tr');
    tr.append(el('td', undefined, row.model_name));
    tr.append(el('td', undefined, formatAccuracy(row.labeled_accuracy)));
    const mass = el('td', undefined, formatPercent(row.posterior_mass));
    mass.dataset.mass = String(row.posterior_mass);
    tr.append(mass);
    table.append(tr);
  }
  return table;
}

function renderActive(root: HTMLElement, controller: SessionController, state: ConsoleState): void {
  root.append(el('p', 'progress', formatProgress(state.step, state.budget)));
  if (state.notice) root.append(el('p', 'notice', state.notice));
  if (state.error) root.append(el('p', 'error', state.error));

  if (state.query) {
    const card = el('div', 'query');
    card.append(el('h2', undefined, `label example ${state.query.example_id}`));
    if (state.query.display) {
      if (isImageReference(state.query.display)) {
        const img = el('img');
        img.src = state.query.display;
        img.alt = state.query.example_id;
        card.append(img);
      } else {
        card.append(el('p', 'display', state.query.display));
      }
    }
    const choices = el('div', 'choices');
    for (let label = 0; label < state.query.num_classes; label += 1) {
      const btn = el('button', undefined, formatClassChoice(label));
      btn.addEventListener('click', () => void controller.submitLabel(label));
      btn.disabled = state.busy;
      choices.append(btn);
    }
    card.append(choices);
    root.append(card);
  } else {
    root.append(el('p', 'notice', 'budget exhausted, finalize to pick the winner'));
  }

  const finalize = el('button', 'finalize', 'finalize session [key f]');
  finalize.disabled = state.step < 1 || state.busy;
  finalize.addEventListener('click', () => void controller.finalizeSession());
  root.append(finalize);
  root.append(renderLeaderboard(state));
}

function renderFinal(root: HTMLElement, controller: SessionController, state: ConsoleState): void {
  const sel = state.selection;
  if (!sel) return;
  const card = el('div', 'final');
  card.append(el('h2', undefined, `selected model: ${sel.model_name}`));
  card.append(
    el(
      'p',
      undefined,
      `labeled accuracy ${formatAccuracy(sel.labeled_accuracy)}, ` +
        `posterior ${formatPercent(sel.posterior_mass)}`,
    ),
  );
  const download = el('a', 'download', 'download transcript');
  const blob = new Blob([controller.transcriptJson()], { type: 'application/json' });
  download.href = URL.createObjectURL(blob);
  download.download = controller.transcriptFilename();
  card.append(download);
  root.append(card);
  root.append(renderLeaderboard(state));
}

export function mount(root: HTMLElement): SessionController {
  const controller = new SessionController(
    new ApiClient(localStorage.getItem('modelpick.baseUrl') ?? 'http://127.0.0.1:8000'),
    (state) => render(root, controller, state),
  );
  attachHotkeys(
    () =>
      controller.state.phase === 'active' && controller.state.query
        ? {
            numClasses: controller.state.query.num_classes,
            canFinalize: controller.state.step >= 1,
          }
        : null,
    (action) => {
      if (action.type === 'label') void controller.submitLabel(action.label);
      else void controller.finalizeSession();
    },
  );
  render(root, controller, controller.state);
  return controller;
}

function render(root: HTMLElement, controller: SessionController, state: ConsoleState): void {
  root.replaceChildren();
  if (state.phase === 'setup') renderSetup(root, controller, state);
  else if (state.phase === 'finalized') renderFinal(root, controller, state);
  else renderActive(root, controller, state);
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mount(document.getElementById('app') as HTMLElement);
}
