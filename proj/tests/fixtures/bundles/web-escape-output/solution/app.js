const name = new URLSearchParams(location.search).get('name');
const p = document.createElement('p');
p.textContent = 'Hello ' + name;
document.body.appendChild(p);
