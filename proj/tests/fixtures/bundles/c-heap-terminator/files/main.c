#include <stdio.h>
#include <stdlib.h>
#include <string.h>

int main(void)
{
  char line[64];
  char *copy;
  size_t len;

  if (fgets(line, sizeof line, stdin) == NULL)
    return 1;
  line[strcspn(line, "\n")] = '\0';
  len = strlen(line);
  copy = malloc(len);
  if (copy == NULL)
    return 1;
  memcpy(copy, line, len + 1);
  printf("%s\n", copy);
  free(copy);
  return 0;
}
