import { ApsClient } from './client.js';
import { DialogueController } from './controller.js';
import { ChatView } from './ui.js';

const params = new URLSearchParams(window.location.search);
const base = params.get('api') ?? '';
const debug = params.get('debug') === '1';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app container');
}
const controller = new DialogueController(new ApsClient(base));
new ChatView(root, controller, debug);
