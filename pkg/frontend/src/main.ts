import { ReviewClient } from './api.js';
import { ReviewApp } from './app.js';

const client = new ReviewClient('..');  // served under /ui, API lives at the root
const app = new ReviewApp(client);
app.mount(document.getElementById('app')!);

const match = window.location.hash.match(/session=([0-9a-f]+)/);
if (match) {
  void app.resume(match[1]);
}
