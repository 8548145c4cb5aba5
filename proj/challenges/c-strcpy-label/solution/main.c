#include <stdio.h>
#include <string.h>

static int print_label(const char *text)
{
  char label[16];

  if (strlen(text) >= sizeof label) {
    printf("error: label too long\n");
    return 1;
  }
  strcpy(label, text);
  printf("[%s]\n", label);
  return 0;
}

int main(int argc, char *argv[])
{
  if (argc < 2) {
    fprintf(stderr, "usage: app LABEL\n");
    return 2;
  }
  return print_label(argv[1]);
}
